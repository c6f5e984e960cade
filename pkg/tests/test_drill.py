from __future__ import annotations

from fractions import Fraction

import networkx as nx
import pytest

from drillbench.drill import (SeparatedFamily, ball_isometry_audit, certify_cusp, cusp, cusp_counts,
                              default_models, hollow_out, local_model_audit,
                              separated_family_audit, shell_systole, unwrap_and_glue,
                              unwrap_audit, very_translating_check)
from drillbench.graph import GraphError, cycle_graph, path_graph, product_graph
from drillbench.hyperbolicity import four_point_delta, m_min
from drillbench.spaces import axis_in, generate_ball, make_generator
from oracles import to_nx


def _cylinder(n):
    return product_graph(path_graph(5), cycle_graph(n)), list(range(n))


@pytest.fixture(scope="module")
def cyl10():
    g, W = _cylinder(10)
    return unwrap_and_glue(g, W, 1, 1, 5, 3, 3)


@pytest.fixture(scope="module")
def demo73(gen73):
    ball = generate_ball(gen73, None, 10)
    W = axis_in(gen73, "LR", 3, measure=False).vertex_ids(ball)
    return ball, unwrap_and_glue(ball.graph, W, 3, 3, 7, 3, 3)


def test_cusp_counts_reconcile(gen73):
    ball = generate_ball(gen73, None, 8)
    W = axis_in(gen73, "LR", 2, measure=False).vertex_ids(ball)
    c = cusp(ball.graph, W, 2, 3, 3)
    counts = cusp_counts(c)
    assert counts["reconciles"]
    assert {c.depth(x) for x in range(c.graph.n)} == {0, 1, 2, 3}


def test_cusp_rejects_disconnected_shell():
    gen = make_generator("tree:4")
    ball = generate_ball(gen, None, 5)
    W = axis_in(gen, "a", 1, measure=False).vertex_ids(ball)
    with pytest.raises(GraphError):
        cusp(ball.graph, W, 2, 1, 2)


def test_small_cusp_certificate(gen73):
    ball = generate_ball(gen73, None, 5)
    W = axis_in(gen73, "LR", 1, measure=False).vertex_ids(ball)
    c = cusp(ball.graph, W, 1, 3, 2)
    cert = certify_cusp(c)
    assert cert.passed and cert.m == m_min(cert.h)
    assert cert.k == Fraction(3 * cert.m, 2) - 5 * cert.h
    assert cert.k >= four_point_delta(c.graph).delta


def test_cylinder_cover_audit(cyl10):
    rep = unwrap_audit(cyl10)
    assert rep.passed and cyl10.classification["kind"] == "infinite-cyclic"
    assert shell_systole(cyl10) == 10


def test_cylinder_ball_isometry_against_networkx(cyl10):
    rep = ball_isometry_audit(cyl10, Fraction(2, 3))
    assert rep.passed and rep.details["checked"] > 0
    # independent check at one certified centre using full networkx distances
    hu, hc = to_nx(cyl10.graph), to_nx(cyl10.cusped.graph)
    z = cyl10.cover.vid(cyl10.cusped.ctc.of_ambient[22], 0)
    ball = nx.single_source_shortest_path_length(hu, z, cutoff=2)
    for x in ball:
        dx = nx.single_source_shortest_path_length(hu, x, cutoff=4)
        dq = nx.single_source_shortest_path_length(hc, cyl10.q[x], cutoff=4)
        for y in ball:
            assert dx[y] == dq[cyl10.q[y]]


def test_short_girth_cylinder_fails_with_loop():
    g, W = _cylinder(6)
    u = unwrap_and_glue(g, W, 1, 1, 5, 3, 3)
    rep = ball_isometry_audit(u, Fraction(2, 3))
    assert rep.verdict == "fail"
    loop = rep.witness["loop_image"]
    assert loop[0] == loop[-1] and len(loop) - 1 == 6
    assert all(u.cusped.graph.has_edge(a, b) for a, b in zip(loop, loop[1:]))


def test_ball_isometry_rejects_non_integer_radius(cyl10):
    with pytest.raises(GraphError):
        ball_isometry_audit(cyl10, Fraction(1, 2))


def test_very_translating_thresholds(cyl10):
    assert very_translating_check(cyl10, Fraction(4, 10 ** 4)).passed
    rep = very_translating_check(cyl10, Fraction(50, 10 ** 4))
    assert rep.verdict == "fail" and rep.witness["distance"] == 9


def test_tiling_unwrap_local_models(demo73):
    ball, u = demo73
    assert unwrap_audit(u).passed
    rep = local_model_audit(u, 1, default_models(u, ball.graph), stride=11)
    assert rep.passed and sum(rep.details["matched"].values()) > 0


def test_local_models_fail_without_matching_model(demo73):
    ball, u = demo73
    grid = generate_ball(make_generator("grid"), None, 5).graph
    from drillbench.drill import ModelSpace
    rep = local_model_audit(u, 1, [ModelSpace("grid", grid, list(range(grid.n)))], stride=11)
    assert rep.verdict == "fail"


def test_unwrap_requires_infinite_cyclic_complement():
    g = product_graph(path_graph(6), path_graph(6))
    with pytest.raises(GraphError):
        unwrap_and_glue(g, [14, 15], 1, 1, 5, 2, 1)


def test_separated_family_and_hollowing():
    gen = make_generator("grid")
    ball = generate_ball(gen, None, 10)
    idx = {nm: i for i, nm in enumerate(ball.names)}
    a = [idx[(x, 0)] for x in range(-2, 3)]
    b = [idx[(x, 6)] for x in range(-2, 3)]
    fam = SeparatedFamily([a, b], 1, [], 6, reference=(ball.graph, a))
    assert separated_family_audit(ball.graph, fam).passed
    tight = SeparatedFamily([a, b], 1, [], 7, reference=(ball.graph, a))
    assert separated_family_audit(ball.graph, tight).verdict == "fail"
    hb = [idx[(0, -6)]]
    fam_h = SeparatedFamily([a], 1, [hb], 3)
    g2, ctc, keep = hollow_out(ball.graph, fam_h, 1)
    assert idx[(0, -6)] not in keep and ctc is not None and g2.n == ctc.graph.n
