from __future__ import annotations

import pytest

from drillbench.graph import GraphError
from drillbench.spaces import (TranslateFamily, UnsupportedSpaceError, WordError, axis_in,
                               generate_ball, make_generator, separation_audit)
from oracles import reflection_tiling


def test_tree_ball_count():
    assert generate_ball(make_generator("tree:4"), None, 3).graph.n == 1 + 4 + 12 + 36


def test_grid_ball_count():
    assert generate_ball(make_generator("grid"), None, 2).graph.n == 13


@pytest.mark.parametrize("R", [1, 2, 3, 4, 5])
def test_tiling_ball_matches_reflection_oracle(gen73, R):
    ours = generate_ball(gen73, None, R).graph
    ref = reflection_tiling(7, 3, R)
    assert (ours.n, ours.num_edges) == (ref.n, ref.num_edges)
    d1, d2 = ours.bfs([0]), ref.bfs([0])
    assert sorted(d1) == sorted(d2)


def test_tiling_vertices_are_trivalent_inside(gen73):
    ball = generate_ball(gen73, None, 6)
    inner = [v for v in range(ball.graph.n) if ball.graph.bfs([0])[v] < 6]
    assert all(ball.graph.degree(v) == 3 for v in inner)
    assert ball.graph.frontier == {v for v in range(ball.graph.n) if v not in inner}


def test_unsupported_space():
    with pytest.raises(UnsupportedSpaceError):
        make_generator("sphere:2")


def test_tree_axis_is_geodesic():
    ax = axis_in(make_generator("tree:4"), "a", 20)
    assert ax.lam0 == 0 and len(ax.names) == 41


def test_grid_horizontal_axis_is_geodesic():
    ax = axis_in(make_generator("grid"), "a", 6)
    assert ax.lam0 == 0


def test_grid_diagonal_deviation_grows():
    g = make_generator("grid")
    lams = [axis_in(g, "ab", w).lam0 for w in (2, 4, 8)]
    assert lams[0] < lams[1] < lams[2]


def test_tiling_axis_small_deviation(gen73):
    ax = axis_in(gen73, "LR", 8)
    assert ax.lam0 is not None and ax.lam0 <= 2


def test_unrealizable_word():
    with pytest.raises(WordError):
        axis_in(make_generator("tree:4"), "aA", 3)


def test_separation_of_parallel_grid_lines():
    gen = make_generator("grid")
    ball = generate_ball(gen, None, 12)
    idx = {nm: i for i, nm in enumerate(ball.names)}
    a = [idx[(x, 0)] for x in range(-3, 4)]
    b = [idx[(x, 5)] for x in range(-3, 4)]
    fam = TranslateFamily(ball.graph, [a, b])
    assert separation_audit(fam, 5).passed
    rep = separation_audit(fam, 6)
    assert rep.verdict == "fail" and rep.witness["members"] == [0, 1]


def test_tiling_translate_distance_matches_bfs(gen73, ball73_12):
    g = ball73_12.graph
    a = axis_in(gen73, "LR", 2, measure=False).vertex_ids(ball73_12)
    far = next(v for v in range(g.n) if g.bfs([0])[v] == 7)
    b = axis_in(gen73, "LR", 2, base=ball73_12.names[far], measure=False).vertex_ids(ball73_12)
    rep = separation_audit(TranslateFamily(g, [a, b]), 1)
    da = g.bfs(a)
    assert rep.details["min_distance"] == min(da[v] for v in b)


def test_separation_needs_two_members(ball73_12):
    with pytest.raises(GraphError):
        separation_audit(TranslateFamily(ball73_12.graph, [[0]]), 1)
