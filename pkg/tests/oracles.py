"""Independent reference computations used as test oracles."""
from __future__ import annotations

import cmath
import itertools
import math
import random
from fractions import Fraction

import networkx as nx

from drillbench.graph import Graph


def to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return h


def nx_distances(g: Graph, src: int) -> dict[int, int]:
    return nx.single_source_shortest_path_length(to_nx(g), src)


def brute_delta(g: Graph) -> Fraction:
    """Four-point delta by enumerating every quadruple with networkx distances."""
    d = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
    best = 0
    for x, y, z, w in itertools.combinations(range(g.n), 4):
        s = sorted([d[x][y] + d[z][w], d[x][z] + d[y][w], d[x][w] + d[y][z]])
        best = max(best, s[2] - s[1])
    return Fraction(best, 2)


def random_tree(n: int, seed: int) -> Graph:
    rng = random.Random(seed)
    return Graph(n, [(i, rng.randrange(i)) for i in range(1, n)])


def random_connected(n: int, extra: int, seed: int) -> Graph:
    rng = random.Random(seed)
    edges = {(rng.randrange(i), i) for i in range(1, n)}
    while len(edges) < n - 1 + extra:
        a, b = rng.sample(range(n), 2)
        edges.add((min(a, b), max(a, b)))
    return Graph(n, sorted(edges))


def theta_graph(a: int, b: int, c: int) -> Graph:
    """Two poles joined by three internally disjoint arcs of lengths a, b, c."""
    edges = []
    nxt = 2
    for L in (a, b, c):
        prev = 0
        for _ in range(L - 1):
            edges.append((prev, nxt))
            prev = nxt
            nxt += 1
        edges.append((prev, 1))
    return Graph(nxt, edges)


# ---------------------------------------------------------------------------
# {p,q} tiling from reflections of the Schwarz triangle in the Poincare disk


def _reflect(z: complex, p1: complex, p2: complex) -> complex:
    """Reflect ``z`` in the hyperbolic geodesic through ``p1`` and ``p2``."""
    phi = lambda u: (u - p1) / (1 - p1.conjugate() * u)  # noqa: E731
    inv = lambda u: (u + p1) / (1 + p1.conjugate() * u)  # noqa: E731
    q = phi(p2)
    rot = (q / abs(q)) ** 2
    return inv(rot * phi(z).conjugate())


def _hdist(a: complex, b: complex) -> float:
    return 2 * math.atanh(abs((a - b) / (1 - a.conjugate() * b)))


def reflection_tiling(p: int, q: int, R: int) -> Graph:
    """Ball of radius ``R`` about a vertex of the {p,q} tiling, from chamber reflections.

    The chamber has angles pi/q at the tiling vertex (placed at 0), pi/p at
    the face centre and pi/2 at the edge midpoint.
    """
    A, B = math.pi / q, math.pi / p
    vm = math.acosh(math.cos(B) / math.sin(A))   # vertex to edge midpoint
    vc = math.acosh(1 / (math.tan(A) * math.tan(B)))  # vertex to face centre
    edge = 2 * vm
    M = math.tanh(vm / 2) + 0j
    C = cmath.rect(math.tanh(vc / 2), A)
    V = 0j
    limit = R * edge + 2 * vc
    key = lambda z: (round(z.real, 6), round(z.imag, 6))  # noqa: E731
    start = (V, C, M)
    seen = {tuple(sorted(key(z) for z in start))}
    queue = [start]
    verts: dict[tuple, complex] = {key(V): V}
    while queue:
        v, c, m = queue.pop()
        for a, b, z in ((v, c, m), (v, m, c), (c, m, v)):
            img = _reflect(z, a, b)
            ch = (v, c, m)
            ch = tuple(img if u == z else u for u in ch)
            if _hdist(0j, ch[0]) > limit:
                continue
            k = tuple(sorted(key(u) for u in ch))
            if k in seen:
                continue
            seen.add(k)
            queue.append(ch)
            verts.setdefault(key(ch[0]), ch[0])
    pts = list(verts.values())
    idx = {key(z): i for i, z in enumerate(pts)}
    edges = [(i, j) for i, j in itertools.combinations(range(len(pts)), 2)
             if abs(_hdist(pts[i], pts[j]) - edge) < 1e-6]
    g = nx.Graph()
    g.add_nodes_from(range(len(pts)))
    g.add_edges_from(edges)
    o = idx[key(0j)]
    d = nx.single_source_shortest_path_length(g, o, cutoff=R)
    keep = sorted(d, key=lambda v: (d[v], v))
    loc = {v: i for i, v in enumerate(keep)}
    sub = [(loc[a], loc[b]) for a, b in g.subgraph(keep).edges]
    return Graph(len(keep), sub)
