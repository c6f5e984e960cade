"""Graph isomorphism by colour refinement with individualisation.

Initial colours encode whatever must be preserved (distance to the centre,
labels, membership in a marked subset), so pointed and set-preserving
isomorphisms are both special cases of :func:`find_isomorphism`.
"""
from __future__ import annotations

from typing import Hashable, Mapping, Sequence

from .graph import Graph, GraphError, PointedBall


def _refine(adj: Sequence[Sequence[int]], colors: list[int]) -> list[int]:
    """Stable colouring of a (disjoint-union) graph, canonical colour ids."""
    n_classes = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted(colors[w] for w in adj[v]))) for v in range(len(adj))]
        table = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [table[s] for s in sigs]
        if len(table) == n_classes:
            return new
        n_classes = len(table)
        colors = new


def _canon(keys: Sequence[Hashable]) -> list[int]:
    table = {k: i for i, k in enumerate(sorted(set(keys), key=repr))}
    return [table[k] for k in keys]


def find_isomorphism(
    a: Graph,
    b: Graph,
    keys_a: Sequence[Hashable] | None = None,
    keys_b: Sequence[Hashable] | None = None,
    budget: int = 200_000,
) -> dict[int, int] | None:
    """Return an isomorphism ``a -> b`` respecting vertex keys, or ``None``.

    Raises ``RuntimeError`` when the backtracking budget is exhausted so that a
    hard instance is never mistaken for a non-isomorphic one.
    """
    if a.n != b.n or a.num_edges != b.num_edges:
        return None
    n = a.n
    if n == 0:
        return {}
    keys_a = list(keys_a) if keys_a is not None else [0] * n
    keys_b = list(keys_b) if keys_b is not None else [0] * n
    keys_a = [(k, len(a.adj[v])) for v, k in enumerate(keys_a)]
    keys_b = [(k, len(b.adj[v])) for v, k in enumerate(keys_b)]
    adj = [list(x) for x in a.adj] + [[w + n for w in x] for x in b.adj]
    colors = _refine(adj, _canon(keys_a + keys_b))
    state = {"steps": 0}

    def search(cols: list[int]) -> dict[int, int] | None:
        state["steps"] += 1
        if state["steps"] > budget:
            raise RuntimeError("isomorphism search budget exhausted")
        ca, cb = cols[:n], cols[n:]
        if sorted(ca) != sorted(cb):
            return None
        classes: dict[int, list[int]] = {}
        for v, c in enumerate(ca):
            classes.setdefault(c, []).append(v)
        if all(len(m) == 1 for m in classes.values()):
            where = {c: v for v, c in enumerate(cb)}
            mapping = {v: where[c] for v, c in enumerate(ca)}
            for u, w in a.edges:
                if not b.has_edge(mapping[u], mapping[w]):
                    return None
            return mapping
        target = min((len(m), c) for c, m in classes.items() if len(m) > 1)[1]
        v = classes[target][0]
        fresh = max(cols) + 1
        for w in (x for x, c in enumerate(cb) if c == target):
            trial = list(cols)
            trial[v] = fresh
            trial[w + n] = fresh
            found = search(_refine(adj, trial))
            if found is not None:
                return found
        return None

    return search(colors)


def pointed_isomorphic(
    a: PointedBall,
    b: PointedBall,
    labels_a: Mapping[int, Hashable] | None = None,
    labels_b: Mapping[int, Hashable] | None = None,
) -> dict[int, int] | None:
    """Isomorphism of balls sending centre to centre (and labels to labels)."""
    if a.radius != b.radius:
        raise GraphError(f"radius mismatch: {a.radius} vs {b.radius}")
    da = a.graph.bfs([a.center])
    db = b.graph.bfs([b.center])
    ka = [(da[v], None if labels_a is None else labels_a.get(v)) for v in range(a.graph.n)]
    kb = [(db[v], None if labels_b is None else labels_b.get(v)) for v in range(b.graph.n)]
    return find_isomorphism(a.graph, b.graph, ka, kb)


def set_preserving_isomorphism(
    a: Graph, wa: set[int] | frozenset[int], b: Graph, wb: set[int] | frozenset[int]
) -> dict[int, int] | None:
    """Isomorphism ``a -> b`` carrying ``wa`` onto ``wb``."""
    if len(wa) != len(wb):
        return None
    da = a.bfs(wa) if wa else [0] * a.n
    db = b.bfs(wb) if wb else [0] * b.n
    return find_isomorphism(a, b, list(da), list(db))
