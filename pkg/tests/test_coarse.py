from __future__ import annotations

import itertools

import pytest

from drillbench.coarse import (canonical_cyclic, classify_small, closed_walks, cover_audit, csc_check,
                               embedded_cycles, free_reduce, pi1D_presentation,
                               project_retraction, retraction_axioms, retraction_pi1_transfer,
                               smith_invariants, walk_is_trivial, z_cover)
from drillbench.graph import GraphError, cycle_graph, path_graph, product_graph
from drillbench.spaces import axis_in, generate_ball, make_generator
from oracles import random_connected, theta_graph, to_nx

import networkx as nx


def test_free_reduce_and_cyclic_form():
    assert free_reduce([1, 2, -2, -1, 3]) == (3,)
    assert canonical_cyclic([2, 1]) == canonical_cyclic([1, 2])


def test_smith_invariants_known():
    assert smith_invariants([[2, 0], [0, 3]], 2) == (0, [6])
    assert smith_invariants([[2, 4]], 2) == (1, [2])


def test_embedded_cycles_match_networkx():
    g = product_graph(path_graph(3), path_graph(3))
    ours = {frozenset(c) for c in embedded_cycles(g, 8)}
    ref = {frozenset(c) for c in nx.simple_cycles(to_nx(g), length_bound=8)}
    assert ours == ref


@pytest.mark.parametrize("n,D", [(n, D) for n in range(3, 15) for D in range(1, 15)])
def test_cycle_classification(n, D):
    v = classify_small(pi1D_presentation(cycle_graph(n), D))
    assert v.kind == ("trivial" if n <= D else "infinite-cyclic")


@pytest.mark.parametrize("a,b,c,D", [(2, 3, 4, 4), (2, 3, 4, 5), (2, 3, 4, 6), (2, 3, 4, 7),
                                      (3, 3, 3, 5), (3, 3, 3, 6), (1, 4, 5, 5)])
def test_theta_classification(a, b, c, D):
    short = sum(1 for x, y in itertools.combinations((a, b, c), 2) if x + y <= D)
    expect = {0: "free", 1: "infinite-cyclic"}.get(short, "trivial")
    v = classify_small(pi1D_presentation(theta_graph(a, b, c), D))
    assert v.kind == expect
    if expect == "free":
        assert v.evidence["free_rank"] == 2


def test_csc_on_grid_and_cycle():
    g = product_graph(path_graph(4), path_graph(4))
    rep = csc_check(g, 4)
    assert rep.passed and rep.details["length_diameter_cross_check"]["consistent"]
    assert csc_check(cycle_graph(9), 8).verdict == "fail"


@pytest.mark.parametrize("seed", range(3))
def test_short_closed_walks_are_trivial(seed):
    g = random_connected(12, 4, seed)
    pres = pi1D_presentation(g, 5)
    for v in range(g.n):
        for w in closed_walks(g, v, 5):
            assert walk_is_trivial(pres, w)


def test_long_cycle_not_trivial():
    g = cycle_graph(7)
    pres = pi1D_presentation(g, 5)
    assert not walk_is_trivial(pres, list(range(7)) + [0])


def test_cycle_cover_is_a_line():
    base = cycle_graph(10)
    pres = pi1D_presentation(base, 5)
    hom = classify_small(pres).z_hom(pres.n_gens)
    cov = z_cover(base, 5, hom, 2, pres=pres)
    assert cov.graph.n == 50 and cov.graph.num_edges == 49
    assert nx.is_tree(to_nx(cov.graph)) and max(d for _, d in to_nx(cov.graph).degree) == 2
    assert cover_audit(cov).passed


def test_cover_rejects_bad_hom():
    base = cycle_graph(10)
    with pytest.raises(GraphError):
        z_cover(base, 5, [2], 1)
    with pytest.raises(GraphError):
        z_cover(cycle_graph(4), 5, [], 1)


def test_projection_retraction_on_tree():
    ball = generate_ball(make_generator("tree:3"), None, 6)
    ax = axis_in(make_generator("tree:3"), "ab", 2, measure=False).vertex_ids(ball)
    r = project_retraction(ball.graph, ax, 1, 0, 0)
    rep = retraction_axioms(r)
    assert rep.passed
    assert all(r.stable[v] == v for v in r.target)


def test_retraction_rejects_small_K(ball73_12, axis73_12):
    with pytest.raises(GraphError):
        project_retraction(ball73_12.graph, axis73_12, 9, 5 / 2, 1)


def test_retraction_axioms_detect_jumps():
    g = path_graph(5)
    r = project_retraction(g, [0], 0, 0, 0)
    r.maps[1] = [0, 0, 0, 0, 0]
    assert retraction_axioms(r).verdict == "fail"


def test_pi1_transfer_on_cylinder():
    g = product_graph(path_graph(4), cycle_graph(12))
    core = list(range(12))  # row 0
    r = project_retraction(g, core, 0, 0, 0)
    outer = list(range(36, 48)) + [36]
    rep = retraction_pi1_transfer(r, 5, [core + [0], outer], 0)
    assert rep.passed
    assert rep.details["target_group"]["kind"] == "infinite-cyclic"
    assert [t["classes_agree"] for t in rep.details["transfers"]] == [True, True]
    assert rep.details["transfers"][1]["image"] == core + [0]
