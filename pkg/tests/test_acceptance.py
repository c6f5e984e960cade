"""Acceptance suite: one test per criterion, each timed against its budget.

Every test records a one-line PASS/FAIL summary, printed at the end of the run.
"""
from __future__ import annotations

import itertools
import json
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from pathlib import Path

import networkx as nx
from mpmath import mp

from drillbench.boundary import (linear_connectedness_estimate, spherical_connectivity_check,
                                 sphere_sample, tree_sphere_sample)
from drillbench.coarse import (classify_small, closed_walks, cover_audit, pi1D_presentation,
                               project_retraction, retraction_axioms,
                               walk_is_trivial, z_cover)
from drillbench.constants import (SURROGATE, constants_ledger, ledger_identities, phi_from_json)
from drillbench.drill import (SeparatedFamily, ball_isometry_audit, certify_cusp, cusp,
                              default_models, iterate_unwrap, local_model_audit,
                              separated_family_audit, unwrap_and_glue)
from drillbench.graph import cycle_graph, path_graph, product_graph
from drillbench.horoballs import build_horoball, distortion_audit, short_distance_audit
from drillbench.hyperbolicity import (PathFamily, certify_guess_geodesics, four_point_delta,
                                      geodesic_family)
from drillbench.pipeline import load_config, run_pipeline
from drillbench.shells import (coarse_surjectivity_audit, completed_shell,
                               projection_stability_audit, scale_floor, shell_connectivity_audit,
                               shell_projection)
from drillbench.spaces import axis_in, generate_ball, make_generator
from oracles import random_connected, random_tree, theta_graph, to_nx

ROOT = Path(__file__).resolve().parent.parent
RESULTS: list[str] = []
DELTA73 = Fraction(5, 2)


@contextmanager
def criterion(n: int, title: str, budget: float, summary: dict):
    """Time a criterion, enforce its budget and record one PASS/FAIL line."""
    t0 = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        dt = time.perf_counter() - t0
        if ok and dt >= budget:
            ok = False
            summary["over_budget"] = True
        extra = ", ".join(f"{k}={v}" for k, v in summary.items())
        RESULTS.append(f"AC{n:02d} {'PASS' if ok else 'FAIL'}  {dt:7.1f}s / {budget:g}s  {title}"
                       + (f"  [{extra}]" if extra else ""))
    assert dt < budget, f"runtime {dt:.1f}s exceeds {budget}s"


def _horoball_bases():
    tree = generate_ball(make_generator("tree:3"), None, 4).graph
    rnd = random_connected(60, 15, seed=7)
    return {"P40": path_graph(40), "C40": cycle_graph(40), "tree3-R4": tree, "random60": rnd}


def test_ac01_horoball_distortion():
    s = {}
    with criterion(1, "horoball distortion on all base pairs, depth_max 9", 60, s):
        for name, base in _horoball_bases().items():
            rep = distortion_audit(build_horoball(base, 9))
            s[name] = rep.details.get("pairs")
            assert rep.passed, (name, rep.to_dict())


def test_ac02_short_distances_preserved():
    s = {}
    with criterion(2, "base distance < 6 implies horoball distance equal", 10, s):
        for name, base in _horoball_bases().items():
            rep = short_distance_audit(build_horoball(base, 9), bound=6)
            s[name] = rep.details.get("pairs")
            assert rep.passed, (name, rep.to_dict())


def test_ac03_delta_trees_and_grids():
    s = {}
    with criterion(3, "delta 0 on 20 random trees, strictly increasing on grid balls", 60, s):
        for seed in range(20):
            n = 40 + (seed * 7) % 41
            assert four_point_delta(random_tree(n, seed)).delta == 0
        grid = make_generator("grid")
        ds = [four_point_delta(generate_ball(grid, None, R).graph).delta for R in (3, 4, 5)]
        s["grid_delta"] = [str(d) for d in ds]
        assert ds[0] < ds[1] < ds[2]


def test_ac04_pi1_classification():
    s = {}
    with criterion(4, "cycle and theta-graph coarse fundamental groups", 30, s):
        count = 0
        for n in range(3, 15):
            for D in range(1, 15):
                v = classify_small(pi1D_presentation(cycle_graph(n), D))
                assert v.kind == ("trivial" if n <= D else "infinite-cyclic"), (n, D, v.kind)
                count += 1
        for a, b, c in [(1, 3, 4), (2, 3, 4), (3, 3, 3), (2, 5, 6), (3, 4, 6)]:
            for D in range(1, 14):
                short = sum(1 for x, y in itertools.combinations((a, b, c), 2) if x + y <= D)
                expect = {0: "free", 1: "infinite-cyclic"}.get(short, "trivial")
                assert classify_small(pi1D_presentation(theta_graph(a, b, c), D)).kind == expect
                count += 1
        s["cases"] = count


def test_ac05_cycle_cover():
    s = {}
    with criterion(5, "Z-cover of C10 at D=5 is a line with a deck shift", 30, s):
        base = cycle_graph(10)
        pres = pi1D_presentation(base, 5)
        hom = classify_small(pres).z_hom(pres.n_gens)
        cov = z_cover(base, 5, hom, 2, pres=pres)
        h = to_nx(cov.graph)
        assert nx.is_tree(h) and max(d for _, d in h.degree) == 2
        ends = [v for v, d in h.degree if d == 1]
        assert nx.shortest_path_length(h, *ends) == cov.graph.n - 1
        for x in range(cov.graph.n):
            y = cov.deck(x)
            if y is not None:
                assert cov.projection[y] == cov.projection[x] and cov.fiber[y] == cov.fiber[x] + 1
        rep = cover_audit(cov)
        s["walks_lifted"] = rep.details.get("walks_lifted")
        assert rep.passed


def test_ac06_relator_soundness():
    s = {}
    with criterion(6, "closed walks of length <= D are trivial in the presentation", 120, s):
        total = 0
        for seed in range(10):
            n, D = 15 + seed, 4 + seed % 3
            g = random_connected(n, 3 + seed % 4, seed=100 + seed)
            pres = pi1D_presentation(g, D)
            for v in range(g.n):
                for w in closed_walks(g, v, D):
                    total += 1
                    assert walk_is_trivial(pres, w), (seed, w)
        s["walks"] = total


def test_ac07_retraction_axioms():
    s = {}
    with criterion(7, "projection retraction axioms on tree and {7,3}", 60, s):
        tree_gen = make_generator("tree:3")
        tb = generate_ball(tree_gen, None, 8)
        tw = axis_in(tree_gen, "ab", 2, measure=False).vertex_ids(tb)
        r = project_retraction(tb.graph, tw, 1, 0, 0)
        assert retraction_axioms(r).passed
        assert all(r.stable[v] == v for v in r.target)
        g7 = make_generator("tiling:7,3")
        ball = generate_ball(g7, None, 14)
        ax = axis_in(g7, "LR", 4)
        W = ax.vertex_ids(ball)
        lam = ax.lam0 or 0
        K = int(4 * DELTA73 + lam)
        r7 = project_retraction(ball.graph, W, K, DELTA73, lam)
        rep = retraction_axioms(r7)
        s.update(steps=rep.details["steps"], Q=str(r7.Q), K=K)
        assert rep.passed and rep.details["steps"] >= 2
        assert all(r7.stable[v] == v for v in r7.target)


def test_ac08_projection_stability(ball73_12, axis73_12, dist73_12):
    s = {}
    with criterion(8, "shell projection stability and coarse surjectivity on {7,3}", 120, s):
        for K in (3, 4):
            proj = shell_projection(ball73_12.graph, axis73_12, K)
            st = projection_stability_audit(proj, DELTA73, dist=dist73_12)
            cs = coarse_surjectivity_audit(proj, DELTA73, dist73_12)
            s[f"K{K}"] = (st.details["max_shift"], cs.details.get("slack"))
            assert st.passed and cs.passed


def test_ac09_shell_dichotomy(ball73_12, axis73_12):
    s = {}
    with criterion(9, "{7,3} shell connected; tree(4) shell has exactly 2 components", 60, s):
        cs = completed_shell(ball73_12.graph, axis73_12, 3, 3)
        s["tiling_connected"] = shell_connectivity_audit(cs).passed
        gen = make_generator("tree:4")
        ball = generate_ball(gen, None, 8)
        W = axis_in(gen, "a", 4, measure=False).vertex_ids(ball)
        tcs = completed_shell(ball.graph, W, 2, scale_floor(0))
        s["tree_components"] = len(tcs.components())
        assert s["tiling_connected"]
        assert s["tree_components"] == 2


def _m_scan(h: Fraction) -> int:
    with mp.workdps(60):
        m = 1
        while 2 * mp.mpf(h.numerator) / h.denominator * (6 + mp.log(m + 2, 2)) > m:
            m += 1
        return m


def test_ac10_guessing_geodesics():
    s = {}
    with criterion(10, "tree geodesic certificate and random-path rejection", 30, s):
        g = generate_ball(make_generator("tree:3"), None, 3).graph
        cert = certify_guess_geodesics(g, geodesic_family(g), h=1)
        assert cert.passed
        h = Fraction(1)
        m = cert.m
        assert 2 ** (m - 12) >= (m + 2) ** 2  # 2h(6 + log2(m+2)) <= m at h = 1
        assert cert.k == Fraction(3 * m, 2) - 5 * h
        assert m == _m_scan(h)
        rng = random.Random(0)
        hx = to_nx(g)
        paths = {}
        for x in range(g.n):
            for y in range(x + 1, g.n):
                via = rng.randrange(g.n)
                paths[(x, y)] = nx.shortest_path(hx, x, via) + nx.shortest_path(hx, via, y)[1:]
        bad = certify_guess_geodesics(g, PathFamily(g.n, paths), h=1)
        s.update(m=m, k=str(cert.k), random_witness=bad.witness)
        assert not bad.passed and bad.witness is not None


def test_ac11_cusp_certificate():
    s = {}
    with criterion(11, "cusped {7,3} space certified, k above measured delta", 300, s):
        g7 = make_generator("tiling:7,3")
        ball = generate_ball(g7, None, 7)
        W = axis_in(g7, "LR", 2, measure=False).vertex_ids(ball)
        c = cusp(ball.graph, W, 2, 3, 4)
        cert = certify_cusp(c)
        assert cert.passed
        # central ball: radius 3 about the deepest vertex over the shell point nearest the origin
        d0 = ball.graph.bfs([ball.center])
        shell = c.ctc.cs.shell
        near = min(range(len(shell)), key=lambda i: (d0[shell[i]], i))
        centre = c.vid(near, 2)
        dc = c.graph.bfs([centre])
        pts = [x for x in range(c.graph.n) if dc[x] <= 3]
        delta = four_point_delta(c.graph, vertices=pts).delta
        s.update(h=str(cert.h), m=cert.m, k=str(cert.k), central_delta=str(delta), points=len(pts))
        assert cert.k >= delta


def test_ac12_ball_isometry():
    s = {}
    with criterion(12, "ball isometry on cylinders and {7,3}; small girth fails", 300, s):
        for n in (10, 16):
            g = product_graph(path_graph(5), cycle_graph(n))
            u = unwrap_and_glue(g, list(range(n)), 1, 1, 5, 3, 3)
            rep = ball_isometry_audit(u, Fraction(2, 3))
            s[f"C{n}_systole"] = rep.details["shell_systole"]
            assert rep.passed and rep.details["checked"] > 0
        g7 = make_generator("tiling:7,3")
        ball = generate_ball(g7, None, 10)
        W = axis_in(g7, "LR", 3, measure=False).vertex_ids(ball)
        u = unwrap_and_glue(ball.graph, W, 3, 3, 7, 3, 3)
        rep = ball_isometry_audit(u, Fraction(2, 3), stride=3)
        s["tiling_systole"] = rep.details["shell_systole"]
        assert rep.passed and rep.details["checked"] > 0
        g = product_graph(path_graph(5), cycle_graph(6))
        u = unwrap_and_glue(g, list(range(6)), 1, 1, 5, 3, 3)
        bad = ball_isometry_audit(u, Fraction(2, 3))
        loop = bad.witness["loop_image"]
        s["C6_loop"] = len(loop) - 1
        assert bad.verdict == "fail" and loop[0] == loop[-1]
        assert len(loop) - 1 <= 6 * Fraction(2, 3) * 3


def test_ac13_local_models(ball73_12, axis73_12):
    s = {}
    with criterion(13, "sampled balls of unwrapped {7,3} match a model", 300, s):
        u = unwrap_and_glue(ball73_12.graph, axis73_12, 3, 3, 7, 3, 4)
        models = default_models(u, ball73_12.graph)
        for radius in (1, 2):
            rep = local_model_audit(u, radius, models, stride=7)
            s[f"r{radius}"] = rep.details["matched"]
            assert rep.passed


def test_ac14_iterate_unwrap():
    s = {}
    with criterion(14, "two-step unwrap keeps separation, lifts tubes, stabilizes ball", 600, s):
        sched = json.loads((ROOT / "configs" / "schedule-73-two-tubes.json").read_text())
        gen = make_generator("tiling:7,3")
        ball = generate_ball(gen, None, 12)
        tubes = [axis_in(gen, t["word"], t["window"], base=t.get("base"), measure=False).vertex_ids(ball)
                 for t in sched["tubes"]]
        g = ball.graph
        fam = SeparatedFamily(tubes, sched["K"], [], sched["chi"], reference=(g, tubes[0]))
        assert separated_family_audit(g, fam).passed
        steps, summary = iterate_unwrap(g, fam, sched["order"], 2, sched["cover_window"], sched["s"],
                                        sched["D"], sched["depth_max"], ball.index_of(sched["basepoint"]),
                                        sched["ball_radius"])
        stab = summary.details["stabilization"]
        s["stabilization"] = [(e["stable"], e["basepoint_to_new_shell"]) for e in stab]
        assert summary.passed and len(steps) == 2
        assert all(st.report.passed for st in steps)
        # the second tube is far from the basepoint, so the ball must be unchanged
        assert stab[1]["basepoint_to_new_shell"] > 2 * sched["ball_radius"] and stab[1]["stable"]


def test_ac15_constants():
    s = {}
    with criterion(15, "constants cascade identities bit-exact", 5, s):
        phi = phi_from_json({"kind": "identity"})
        led = constants_ledger(1, 0, 5, 0, phi)
        rep = ledger_identities(led)
        assert rep.passed
        assert led.delta2 == 1500 * led.delta1
        assert led.sys0.equals(25 * int(led.sigma0), led.Q0)
        assert led.Sigma == led.Sigma1 + 2 * led.R0
        assert led.sigma0 == max(10 ** 7 * led.delta1, 10 ** 5 * led.D1)
        toy = constants_ledger(Fraction(1, 2), 0, 2, 0, phi, SURROGATE)
        assert ledger_identities(toy).passed
        assert toy.sys0.value() == (1 << int(toy.sigma0)) * toy.Q0
        s.update(sigma0=led.sigma0, sys0_bits=led.sys0.bit_length_bound())


def test_ac16_boundary_testers():
    s = {}
    with criterion(16, "linear connectedness none on trees, finite stable L on {7,3}", 300, s):
        tree = make_generator("tree:4")
        for seed in (0, 1):
            v = linear_connectedness_estimate(tree_sphere_sample(tree, 12, 300, seed))
            assert v.summary == "none <= 50"
        g7 = make_generator("tiling:7,3")
        ball = generate_ball(g7, None, 17)
        Ls = []
        for R in (12, 13, 14):
            v = linear_connectedness_estimate(sphere_sample(ball.graph, 0, R, DELTA73), sources=30, seed=1)
            assert v.status == "finite"
            Ls.append(v.L)
        s["tiling_L"] = Ls
        assert max(Ls) - min(Ls) <= 1
        tb = generate_ball(tree, None, 6)
        sphere = [v for v in range(tb.graph.n) if len(tb.names[v]) == 5]
        cross = [(a, b) for a in sphere[:40:3] for b in sphere[-40::3] if tb.names[a][0] != tb.names[b][0]]
        for Delta in range(0, 5):
            rep = spherical_connectivity_check(tb.graph, 0, 5, Delta, Fraction(1, 2), pairs=cross)
            assert rep.verdict == "fail"
        s["cross_pairs"] = len(cross)


def test_ac17_determinism(tmp_path):
    s = {}
    with criterion(17, "demo pipeline bundles byte-identical across runs", 900, s):
        cfg = load_config(ROOT / "configs" / "demo-73.json")
        dirs = []
        for i in range(2):
            out = tmp_path / f"run{i}"
            bundle = run_pipeline(json.loads(json.dumps(cfg)))
            bundle.write(out)
            dirs.append(out)
        a = sorted(p.name for p in dirs[0].iterdir())
        b = sorted(p.name for p in dirs[1].iterdir())
        assert a == b
        for name in a:
            assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
        s.update(files=len(a), verdict=bundle.verdict)
        assert bundle.verdict == "pass"
