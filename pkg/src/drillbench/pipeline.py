"""Declarative pipelines: validate a config, run its stages in order, write a report bundle."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import jsonschema

from .boundary import adapted_delta, linear_connectedness_estimate, sphere_sample
from .constants import constants_ledger, ledger_identities, phi_from_json, profile
from .drill import (CuspedSpace, UnwrappedSpace, ball_isometry_audit, certify_cusp, cusp,
                    cusp_counts, default_models, local_model_audit, unwrap_and_glue,
                    unwrap_audit, very_translating_check)
from .graph import GraphError, PointedBall
from .hyperbolicity import four_point_delta
from .report import Report, config_hash, dumps
from .shells import CompletedShell, completed_shell, shell_connectivity_audit
from .spaces import axis_in, generate_ball, make_generator


class ConfigError(GraphError):
    """The configuration does not validate against the pipeline schema."""


class StageError(GraphError):
    def __init__(self, stage: str, index: int, cause: Exception) -> None:
        super().__init__(f"stage {index} ({stage}) failed: {cause}")
        self.stage, self.index, self.cause = stage, index, cause


def load_schema() -> dict:
    return json.loads(resources.files("drillbench").joinpath("schema/pipeline.schema.json").read_text())


def validate_config(cfg: dict) -> None:
    """Raise ConfigError naming the offending field."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        # the most specific error is the one deepest in the document
        err = max(errors, key=lambda e: len(e.absolute_path))
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {err.message}")


def _q(x: Any) -> Fraction:
    return Fraction(x) if not isinstance(x, str) else Fraction(x)


@dataclass
class Context:
    cfg: dict
    seed: int
    profile_name: str
    ball: PointedBall | None = None
    W: list[int] | None = None
    delta: Fraction | None = None
    shell: CompletedShell | None = None
    K: int | None = None
    s: int | None = None
    cusped: CuspedSpace | None = None
    unwrapped: UnwrappedSpace | None = None
    artifacts: dict[str, str] = field(default_factory=dict)

    def need(self, attr: str, stage: str):
        v = getattr(self, attr)
        if v is None:
            raise GraphError(f"{stage} needs a preceding stage that provides {attr}")
        return v


def _gen_space(ctx: Context, st: dict) -> Report:
    sp = ctx.cfg["space"]
    gen = make_generator(sp["spec"])
    ball = generate_ball(gen, None, sp["radius"])
    ctx.ball = ball
    g = ball.graph
    details = {"space": sp["spec"], "radius": sp["radius"], "vertices": g.n,
               "edges": g.num_edges, "frontier": len(g.frontier),
               "graph_sha256": hashlib.sha256(g.to_json().encode()).hexdigest()}
    if "axis" in ctx.cfg:
        ax = ctx.cfg["axis"]
        axis = axis_in(gen, ax["word"], ax["window"])
        ctx.W = axis.vertex_ids(ball)
        details["axis"] = {"word": ax["word"], "window": ax["window"], "vertices": ctx.W,
                           "lam0": axis.lam0, "notes": axis.notes}
    if "dot" in st.get("emit", []):
        ctx.artifacts["space.dot"] = g.to_dot("space")
    if "csv" in st.get("emit", []):
        ctx.artifacts["space-edges.csv"] = "u,v\n" + "".join(f"{u},{v}\n" for u, v in g.edges)
    return Report("gen-space", "pass", details)


def _measure_delta(ctx: Context, st: dict) -> Report:
    ball = ctx.need("ball", "measure-delta")
    g = ball.graph
    r = st.get("radius", ball.radius)
    d0 = g.bfs([ball.center])
    pts = [v for v in range(g.n) if d0[v] <= r]
    policy = "exact" if st.get("policy", "exact") == "exact" else ("sample", st.get("samples", 10000), ctx.seed)
    est = four_point_delta(g, policy, vertices=pts)
    ctx.delta = est.delta
    details = {**est.to_dict(), "central_radius": r, "points": len(pts)}
    if r < ball.radius:
        details["note"] = "quadruples restricted to a central ball, metric of the generated ball"
    return Report("measure-delta", "pass", details)


def _shell(ctx: Context, st: dict) -> Report:
    ball = ctx.need("ball", "shell")
    W = ctx.need("W", "shell")
    ctx.K, ctx.s = st["K"], st["s"]
    ctx.shell = completed_shell(ball.graph, W, ctx.K, ctx.s)
    rep = shell_connectivity_audit(ctx.shell)
    rep.details.update({"K": ctx.K, "s": ctx.s, "shell_vertices": ctx.shell.n_shell})
    return rep


def _cusp(ctx: Context, st: dict) -> Report:
    ball = ctx.need("ball", "cusp")
    ctx.need("shell", "cusp")
    ctx.cusped = cusp(ball.graph, ctx.W, ctx.K, ctx.s, st["depth_max"])
    counts = cusp_counts(ctx.cusped)
    return Report("cusp", "pass" if counts["reconciles"] else "fail",
                  {**counts, "depth_max": st["depth_max"],
                   "horoball_saturated": ctx.cusped.horoball.saturated})


def _certify(ctx: Context, st: dict) -> Report:
    c = ctx.need("cusped", "certify")
    h = _q(st["h"]) if "h" in st else None
    return certify_cusp(c, h=h).report()


def _drill(ctx: Context, st: dict) -> Report:
    ball = ctx.need("ball", "drill")
    ctx.need("shell", "drill")
    u = unwrap_and_glue(ball.graph, ctx.W, ctx.K, ctx.s, st["D"], st["window"], st["depth_max"],
                        cusped=ctx.cusped)
    ctx.unwrapped = u
    rep = unwrap_audit(u)
    rep.details.update({"vertices": u.graph.n, "edges": u.graph.num_edges, "D": st["D"],
                        "window": st["window"], "depth_max": st["depth_max"],
                        "classification": u.classification})
    return rep


def _audit(ctx: Context, st: dict) -> Report:
    u = ctx.need("unwrapped", "audit")
    kind = st["audit"]
    stride = st.get("stride", 1)
    if kind == "balls":
        return ball_isometry_audit(u, _q(st.get("sigma", "1/3")), stride=stride)
    if kind == "models":
        return local_model_audit(u, st.get("radius", 1), default_models(u, ctx.ball.graph), stride=stride)
    return very_translating_check(u, _q(st.get("theta", "1/10000")))


def _boundary(ctx: Context, st: dict) -> Report:
    ball = ctx.need("ball", "boundary-report")
    measured = ctx.delta if ctx.delta is not None else Fraction(0)
    delta, floored = adapted_delta(measured)
    sample = sphere_sample(ball.graph, ball.center, st["R"], delta)
    verdict = linear_connectedness_estimate(sample, st.get("L_max", 50), st.get("sources"),
                                            ctx.seed, _q(st.get("resolution", "3/2")))
    status = {"finite": "pass", "none": "fail", "unresolved": "inconclusive"}[verdict.status]
    return Report("boundary-report", status,
                  {**verdict.to_dict(), "R": st["R"], "delta": delta, "delta_floored": floored,
                   "sample_size": len(sample.points), "sample_notes": sample.notes})


def _constants(ctx: Context, st: dict) -> Report:
    prof_cfg = ctx.cfg.get("profile", {"name": "exact"})
    prof = profile(prof_cfg["name"], prof_cfg.get("overrides"))
    led = constants_ledger(_q(st["delta0"]), _q(st.get("lambda0", 0)), _q(st["L0"]),
                           _q(st.get("A0", 0)), phi_from_json(st.get("phi")), prof)
    return ledger_identities(led)


STAGES: dict[str, Callable[[Context, dict], Report]] = {
    "gen-space": _gen_space,
    "measure-delta": _measure_delta,
    "shell": _shell,
    "cusp": _cusp,
    "certify": _certify,
    "drill": _drill,
    "audit": _audit,
    "boundary-report": _boundary,
    "constants": _constants,
}


@dataclass
class Bundle:
    config_hash: str
    profile: str
    reports: list[tuple[str, dict]]
    artifacts: dict[str, str]
    halted: str | None = None

    @property
    def verdict(self) -> str:
        vs = [r["verdict"] for _, r in self.reports]
        if self.halted or "fail" in vs:
            return "fail"
        return "inconclusive" if "inconclusive" in vs else "pass"

    def manifest(self) -> dict:
        return {"config_hash": self.config_hash, "profile": self.profile, "verdict": self.verdict,
                "halted": self.halted,
                "reports": [{"file": f, "name": r["name"], "verdict": r["verdict"],
                             "sha256": hashlib.sha256(dumps(r).encode()).hexdigest()}
                            for f, r in self.reports]}

    def write(self, out: Path) -> list[Path]:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for fname, rep in self.reports:
            p = out / fname
            p.write_text(dumps(rep))
            paths.append(p)
        for fname, text in sorted(self.artifacts.items()):
            p = out / fname
            p.write_text(text)
            paths.append(p)
        p = out / "bundle.json"
        p.write_text(dumps(self.manifest()))
        paths.append(p)
        return paths


def run_pipeline(cfg: dict, stop_on_fail: bool = True) -> Bundle:
    """Execute the stages in order; an exception halts the run with the stage named."""
    validate_config(cfg)
    h = config_hash(cfg)
    prof = cfg.get("profile", {"name": "exact"})["name"]
    ctx = Context(cfg, cfg.get("seed", 0), prof)
    reports: list[tuple[str, dict]] = []
    halted = None
    for i, st in enumerate(cfg["stages"]):
        kind = st["kind"]
        try:
            rep = STAGES[kind](ctx, st)
        except GraphError as exc:
            rep = Report(kind, "fail", {"error": str(exc)})
            halted = f"{i:02d}-{kind}"
        rep.profile = prof
        d = rep.to_dict()
        d["config_hash"] = h
        d["stage"] = i
        reports.append((f"{i:02d}-{kind}.json", d))
        if halted or (stop_on_fail and rep.verdict == "fail"):
            halted = halted or f"{i:02d}-{kind}"
            break
    return Bundle(h, prof, reports, ctx.artifacts, halted)


def load_config(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
