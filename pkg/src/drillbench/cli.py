"""Command-line front end; every command prints or writes JSON reports.

Exit codes: 0 pass, 1 fail (including invalid input), 2 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .constants import constants_ledger, ledger_identities, phi_from_json, profile
from .drill import SeparatedFamily, iterate_unwrap, separated_family_audit
from .graph import GraphError
from .pipeline import ConfigError, load_config, run_pipeline
from .report import EXIT_CODES, Report, config_hash, dumps
from .spaces import axis_in, generate_ball, make_generator


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are failures, not inconclusive
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--in", dest="inp", help="JSON config supplying space/axis (and stages for 'run')")
    p.add_argument("--out", help="output file (single report) or directory (bundle)")
    p.add_argument("--profile", choices=["exact", "surrogate"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1, help="cap on worker processes")


def _space_args(p: argparse.ArgumentParser, axis: bool = False) -> None:
    p.add_argument("--space", help="tiling:p,q | tree:k | grid | surface:g")
    p.add_argument("--radius", type=int)
    if axis:
        p.add_argument("--word")
        p.add_argument("--window", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="drillbench", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run a full pipeline config")
    _common(p)

    p = sub.add_parser("gen-space", help="generate a ball")
    _common(p)
    _space_args(p, axis=True)
    p.add_argument("--emit", action="append", choices=["dot", "csv"], default=[])

    p = sub.add_parser("measure-delta", help="four-point delta of a ball")
    _common(p)
    _space_args(p)
    p.add_argument("--central-radius", type=int)
    p.add_argument("--samples", type=int, help="sample quadruples instead of the exact sweep")

    for name, extra in (("shell", []), ("cusp", ["depth_max"]), ("certify", ["depth_max"])):
        p = sub.add_parser(name, help=f"{name} stage around an axis")
        _common(p)
        _space_args(p, axis=True)
        p.add_argument("--K", type=int, required=True)
        p.add_argument("--s", type=int, required=True)
        if extra:
            p.add_argument("--depth-max", type=int, required=True)

    p = sub.add_parser("drill", help="unwrap one tube, or iterate over a schedule")
    _common(p)
    _space_args(p, axis=True)
    p.add_argument("--K", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--D", type=int)
    p.add_argument("--cover-window", type=int, help="fibers kept either side of the base fiber")
    p.add_argument("--depth-max", type=int)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--schedule", help="JSON schedule for --steps > 1")

    p = sub.add_parser("audit", help="audit an unwrapped space")
    _common(p)
    _space_args(p, axis=True)
    p.add_argument("--kind", choices=["balls", "models", "vtc"], required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--D", type=int, required=True)
    p.add_argument("--cover-window", type=int, required=True)
    p.add_argument("--depth-max", type=int, required=True)
    p.add_argument("--sigma", default="1/3")
    p.add_argument("--model-radius", type=int, default=1)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--theta", default="1/10000")

    p = sub.add_parser("boundary-report", help="linear connectedness estimate on a sphere")
    _common(p)
    _space_args(p)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--sources", type=int)
    p.add_argument("--L-max", type=int, default=50)
    p.add_argument("--delta-radius", type=int, help="central radius for the delta measurement")

    p = sub.add_parser("constants", help="constants ledger")
    _common(p)
    p.add_argument("--delta0", required=True)
    p.add_argument("--lambda0", default="0")
    p.add_argument("--L0", required=True)
    p.add_argument("--A0", default="0")
    p.add_argument("--phi", help="JSON file describing the proper function (default identity)")
    return ap


def _base_config(args) -> dict:
    cfg: dict = {}
    if args.inp:
        cfg = load_config(args.inp)
    cfg.setdefault("name", args.cmd)
    if getattr(args, "space", None):
        cfg["space"] = {"spec": args.space, "radius": args.radius if args.radius is not None else 6}
    elif getattr(args, "radius", None) is not None and "space" in cfg:
        cfg["space"]["radius"] = args.radius
    if getattr(args, "word", None):
        cfg["axis"] = {"word": args.word, "window": args.window or 1}
    if args.profile:
        cfg["profile"] = {"name": args.profile}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.cmd != "run" and "space" not in cfg:
        raise ConfigError("a space is required (--space/--radius or --in)")
    return cfg


def _stages(args) -> list[dict]:
    c = args.cmd
    st: list[dict] = [{"kind": "gen-space", **({"emit": args.emit} if c == "gen-space" and args.emit else {})}]
    if c == "gen-space":
        return st
    if c == "measure-delta":
        m: dict = {"kind": "measure-delta"}
        if args.central_radius is not None:
            m["radius"] = args.central_radius
        if args.samples:
            m.update(policy="sample", samples=args.samples)
        return st + [m]
    if c == "boundary-report":
        m = {"kind": "measure-delta"}
        if args.delta_radius is not None:
            m["radius"] = args.delta_radius
        b = {"kind": "boundary-report", "R": args.R, "L_max": args.L_max}
        if args.sources:
            b["sources"] = args.sources
        return st + [m, b]
    st.append({"kind": "shell", "K": args.K, "s": args.s})
    if c == "shell":
        return st
    if c in ("cusp", "certify"):
        st.append({"kind": "cusp", "depth_max": args.depth_max})
        return st + ([{"kind": "certify"}] if c == "certify" else [])
    st.append({"kind": "drill", "D": args.D, "window": args.cover_window, "depth_max": args.depth_max})
    if c == "drill":
        return st
    a = {"kind": "audit", "audit": args.kind, "stride": args.stride}
    if args.kind == "balls":
        a["sigma"] = args.sigma
    elif args.kind == "models":
        a["radius"] = args.model_radius
    else:
        a["theta"] = args.theta
    return st + [a]


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _constants(args) -> Report:
    phi_spec = json.loads(Path(args.phi).read_text()) if args.phi else None
    prof = profile(args.profile or "exact")
    led = constants_ledger(Fraction(args.delta0), Fraction(args.lambda0), Fraction(args.L0),
                           Fraction(args.A0), phi_from_json(phi_spec), prof)
    rep = ledger_identities(led)
    return rep


def _iterate(args, cfg: dict) -> Report:
    """Multi-step drilling; the schedule names tubes by axis word, window and base vertex."""
    sched = json.loads(Path(args.schedule).read_text())
    gen = make_generator(cfg["space"]["spec"])
    ball = generate_ball(gen, None, cfg["space"]["radius"])
    g = ball.graph
    tubes = [axis_in(gen, t["word"], t["window"], base=t.get("base"), measure=False).vertex_ids(ball)
             for t in sched["tubes"]]
    ref = tubes[0]
    fam = SeparatedFamily(tubes, sched["K"], [], sched["chi"], reference=(g, ref))
    sep = separated_family_audit(g, fam)
    if not sep.passed:
        return Report("iterate-unwrap", sep.verdict, {"separation": sep.to_dict()})
    bp = ball.index_of(sched["basepoint"]) if "basepoint" in sched else 0
    _, summary = iterate_unwrap(g, fam, sched["order"], args.steps, sched["cover_window"],
                                sched["s"], sched["D"], sched["depth_max"], bp,
                                sched.get("ball_radius", 4))
    summary.details["separation"] = sep.to_dict()
    return summary


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("drillbench: --workers must be positive", file=sys.stderr)
        return 1
    try:
        if args.cmd == "constants":
            rep = _constants(args)
            _emit(rep.to_json(), args.out)
            return rep.exit_code
        cfg = _base_config(args)
        if args.cmd == "drill" and args.steps > 1:
            if not args.schedule:
                raise ConfigError("--steps > 1 needs --schedule")
            rep = _iterate(args, cfg)
            d = rep.to_dict()
            d["config_hash"] = config_hash({"config": cfg, "schedule": args.schedule, "steps": args.steps})
            _emit(dumps(d), args.out)
            return rep.exit_code
        if args.cmd != "run":
            cfg["stages"] = _stages(args)
        bundle = run_pipeline(cfg)
    except (GraphError, OSError, KeyError, ValueError) as exc:
        print(f"drillbench: {exc}", file=sys.stderr)
        return 1
    if args.cmd == "run":
        if args.out:
            bundle.write(Path(args.out))
        sys.stdout.write(dumps(bundle.manifest()))
    elif args.out and Path(args.out).suffix != ".json":
        bundle.write(Path(args.out))
        sys.stdout.write(dumps(bundle.manifest()))
    else:
        _emit(dumps(bundle.reports[-1][1]), args.out)
    return EXIT_CODES[bundle.verdict]


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
