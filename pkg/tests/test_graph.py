from __future__ import annotations

import networkx as nx
import pytest

from drillbench.graph import (Graph, GraphError, ball_around, cycle_graph, distances, path_graph,
                              product_graph, sphere_and_tube)
from drillbench.iso import pointed_isomorphic, set_preserving_isomorphism
from drillbench.spaces import generate_ball, make_generator
from oracles import nx_distances, to_nx


def test_path_distances():
    assert list(distances(path_graph(3), [0])) == [0, 1, 2]


def test_all_sources_give_zero():
    g = cycle_graph(7)
    assert set(distances(g, range(7))) == {0}


def test_empty_sources_rejected():
    with pytest.raises(GraphError):
        distances(path_graph(3), [])


def test_tiling_ball_distances_match_networkx(ball73_12, gen73):
    ball = generate_ball(gen73, None, 6)
    d = distances(ball.graph, [ball.center])
    ref = nx_distances(ball.graph, ball.center)
    assert [d[v] for v in range(ball.graph.n)] == [ref[v] for v in range(ball.graph.n)]
    assert d.max_finite() == 6
    sizes = [len(d.level(r)) for r in range(7)]
    assert all(a < b for a, b in zip(sizes, sizes[1:]))


def test_unreachable_is_infinite():
    g = Graph(3, [(0, 1)])
    assert distances(g, [0])[2] == float("inf")


def test_tree_shell_size():
    ball = generate_ball(make_generator("tree:4"), None, 4)
    shell, tube, closed = sphere_and_tube(ball.graph, [ball.center], 2)
    assert len(shell) == 4 * 3
    assert tube == {v for v in range(ball.graph.n) if ball.graph.bfs([0])[v] < 2}
    assert closed == shell | tube


def test_zero_radius_shell_is_W():
    g = cycle_graph(6)
    shell, tube, _ = sphere_and_tube(g, [0, 1], 0)
    assert shell == {0, 1} and tube == frozenset()


def test_grid_band_matches_brute_force():
    gen = make_generator("grid")
    ball = generate_ball(gen, None, 6)
    names = ball.names
    W = [i for i, (x, y) in enumerate(names) if y == 0 and abs(x) <= 2]
    shell, _, _ = sphere_and_tube(ball.graph, W, 2)
    h = to_nx(ball.graph)
    ref = {v for v in h if min(nx.shortest_path_length(h, v, w) for w in W) == 2}
    assert shell == ref


def test_pointed_isomorphism_tree_and_mismatch():
    tree = generate_ball(make_generator("tree:4"), None, 5).graph
    a, b = ball_around(tree, 0, 3), ball_around(tree, 1, 3)
    # the ball about vertex 1 reaches the truncation, so compare two interior centres
    assert pointed_isomorphic(a, ball_around(tree, 0, 3)) is not None
    grid = generate_ball(make_generator("grid"), None, 3)
    assert pointed_isomorphic(a, grid) is None
    assert b.graph.n == a.graph.n


def test_pointed_isomorphism_radius_mismatch():
    g = cycle_graph(8)
    with pytest.raises(GraphError):
        pointed_isomorphic(ball_around(g, 0, 2), ball_around(g, 0, 3))


def test_tiling_balls_at_different_centres(ball73_12):
    g = ball73_12.graph
    a = ball_around(g, 0, 4)
    other = next(v for v in range(g.n) if g.bfs([0])[v] == 3)
    b = ball_around(g, other, 4)
    m = pointed_isomorphic(a, b)
    assert m is not None
    assert nx.is_isomorphic(to_nx(a.graph), to_nx(b.graph))
    for u, v in a.graph.edges:
        assert b.graph.has_edge(m[u], m[v])


def test_set_preserving_isomorphism_respects_set():
    g = cycle_graph(6)
    assert set_preserving_isomorphism(g, {0}, g, {3}) is not None
    assert set_preserving_isomorphism(g, {0, 1}, g, {0, 2}) is None


def test_product_graph_counts():
    g = product_graph(path_graph(5), cycle_graph(6))
    ref = nx.cartesian_product(nx.path_graph(5), nx.cycle_graph(6))
    assert g.n == ref.number_of_nodes() and g.num_edges == ref.number_of_edges()


def test_graph_json_round_trip():
    g = Graph(4, [(0, 1), (1, 2)], {0: "a"}, frontier=[3])
    h = Graph.from_json(g.to_json())
    assert h == g and h.frontier == g.frontier and h.labels == g.labels


def test_bad_edges_rejected():
    with pytest.raises(GraphError):
        Graph(2, [(0, 2)])
    with pytest.raises(GraphError):
        Graph(2, [(1, 1)])
