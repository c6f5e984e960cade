"""Finite simple graphs with unit edge lengths.

Everything else in the package is built on :class:`Graph`.  Vertices are the
integers ``0..n-1``; adjacency is stored as sorted tuples so that every
traversal order is deterministic.
"""
from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

INF = math.inf


class GraphError(ValueError):
    """Raised when a graph operation's precondition is violated."""


class DisconnectedError(GraphError):
    """Raised when an operation needs a connected graph (or component)."""


class Graph:
    """Immutable finite simple graph on vertices ``0..n-1``.

    ``labels`` carries optional provenance tags (one string per tagged vertex).
    ``frontier`` marks vertices whose neighbourhood is incomplete because the
    graph is a truncation of something larger; exactness audits consult it.
    """

    __slots__ = ("n", "adj", "labels", "frontier", "_csr", "_dmat", "_edges")

    def __init__(
        self,
        n: int,
        edges: Iterable[tuple[int, int]],
        labels: Mapping[int, str] | None = None,
        frontier: Iterable[int] = (),
    ) -> None:
        if n < 0:
            raise GraphError("vertex count must be non-negative")
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"loop at vertex {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        self.n = n
        self.adj: tuple[tuple[int, ...], ...] = tuple(tuple(sorted(s)) for s in nbrs)
        self.labels: dict[int, str] = dict(labels or {})
        self.frontier: frozenset[int] = frozenset(int(v) for v in frontier)
        self._csr = None
        self._dmat = None
        self._edges = None

    # -- basic structure -------------------------------------------------

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.num_edges})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and self.adj == other.adj and self.labels == other.labels

    def __hash__(self) -> int:
        return hash((self.n, self.adj))

    def vertices(self) -> range:
        return range(self.n)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        a = self.adj[u]
        i = _bisect(a, v)
        return i < len(a) and a[i] == v

    @property
    def edges(self) -> list[tuple[int, int]]:
        if self._edges is None:
            self._edges = [(u, v) for u in range(self.n) for v in self.adj[u] if u < v]
        return self._edges

    @property
    def num_edges(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)

    # -- derived graphs --------------------------------------------------

    def induced(self, vertices: Iterable[int]) -> tuple[Graph, list[int]]:
        """Induced subgraph; returns it with the list ``new id -> old id``."""
        keep = sorted(set(vertices))
        index = {v: i for i, v in enumerate(keep)}
        edges = [
            (index[u], index[w])
            for u in keep
            for w in self.adj[u]
            if u < w and w in index
        ]
        labels = {index[v]: t for v, t in self.labels.items() if v in index}
        frontier = {index[v] for v in self.frontier if v in index}
        # vertices that lost a neighbour become frontier vertices of the piece
        for u in keep:
            if any(w not in index for w in self.adj[u]):
                frontier.add(index[u])
        return Graph(len(keep), edges, labels, frontier), keep

    def relabeled(self, labels: Mapping[int, str]) -> Graph:
        return Graph(self.n, self.edges, labels, self.frontier)

    # -- connectivity and distances -------------------------------------

    def csr(self) -> csr_matrix:
        if self._csr is None:
            rows = [u for u in range(self.n) for _ in self.adj[u]]
            cols = [w for u in range(self.n) for w in self.adj[u]]
            data = np.ones(len(rows), dtype=np.int8)
            self._csr = csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        return self._csr

    def components(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by least vertex."""
        if self.n == 0:
            return []
        _, lab = connected_components(self.csr(), directed=False)
        groups: dict[int, list[int]] = {}
        for v, c in enumerate(lab.tolist()):
            groups.setdefault(c, []).append(v)
        return sorted(groups.values(), key=lambda g: g[0])

    def is_connected(self) -> bool:
        return self.n <= 1 or len(self.components()) == 1

    def bfs(self, sources: Iterable[int]) -> list[float]:
        """Multi-source BFS; unreachable vertices get ``INF``."""
        dist: list[float] = [INF] * self.n
        queue: deque[int] = deque()
        for s in sources:
            if dist[s] != 0:
                dist[s] = 0
                queue.append(s)
        adj = self.adj
        while queue:
            u = queue.popleft()
            du = dist[u] + 1
            for w in adj[u]:
                if dist[w] == INF:
                    dist[w] = du
                    queue.append(w)
        return dist

    def bfs_int(self, sources: Iterable[int]) -> list[int]:
        """BFS for connected graphs; raises if some vertex is unreachable."""
        d = self.bfs(sources)
        if any(x == INF for x in d):
            raise DisconnectedError("graph is not connected")
        return [int(x) for x in d]

    def distance_rows(self, sources: Sequence[int]) -> np.ndarray:
        """Distance rows from each source (float, ``inf`` when unreachable)."""
        if len(sources) == 0:
            return np.zeros((0, self.n))
        return shortest_path(self.csr(), unweighted=True, directed=False, indices=list(sources))

    def distance_matrix(self) -> np.ndarray:
        """All-pairs distances as a read-only ``int32`` matrix.

        Only defined for connected graphs, so no sentinel value can leak
        into arithmetic.
        """
        if self._dmat is None:
            if not self.is_connected():
                raise DisconnectedError("distance_matrix needs a connected graph")
            full = shortest_path(self.csr(), unweighted=True, directed=False)
            m = full.astype(np.int32)
            m.setflags(write=False)
            self._dmat = m
        return self._dmat

    def diameter(self) -> int:
        return int(self.distance_matrix().max()) if self.n else 0

    def geodesic(self, u: int, v: int, dist_to_v: Sequence[float] | None = None) -> list[int]:
        """Lexicographically least geodesic from ``u`` to ``v``."""
        if dist_to_v is None:
            dist_to_v = self.bfs([v])
        if dist_to_v[u] == INF:
            raise DisconnectedError(f"{u} and {v} lie in different components")
        path = [u]
        cur = u
        while cur != v:
            target = dist_to_v[cur] - 1
            cur = next(w for w in self.adj[cur] if dist_to_v[w] == target)
            path.append(cur)
        return path

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        out: dict = {"vertices": self.n, "edges": [list(e) for e in self.edges]}
        if self.labels:
            out["labels"] = {str(k): v for k, v in sorted(self.labels.items())}
        if self.frontier:
            out["frontier"] = sorted(self.frontier)
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> Graph:
        labels = {int(k): str(v) for k, v in data.get("labels", {}).items()}
        return cls(int(data["vertices"]), [tuple(e) for e in data["edges"]], labels,
                   data.get("frontier", ()))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> Graph:
        return cls.from_dict(json.loads(text))

    def to_dot(self, name: str = "G") -> str:
        lines = [f"graph {name} {{"]
        for v in range(self.n):
            tag = self.labels.get(v)
            lines.append(f'  {v} [label="{v}:{tag}"];' if tag else f"  {v};")
        lines.extend(f"  {u} -- {v};" for u, v in self.edges)
        lines.append("}")
        return "\n".join(lines) + "\n"


def _bisect(a: Sequence[int], x: int) -> int:
    lo, hi = 0, len(a)
    while lo < hi:
        mid = (lo + hi) // 2
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise GraphError("a simple cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def product_graph(a: Graph, b: Graph) -> Graph:
    """Cartesian product; vertex ``(x, y)`` gets id ``x * b.n + y``."""
    edges = []
    for x in range(a.n):
        for u, v in b.edges:
            edges.append((x * b.n + u, x * b.n + v))
    for u, v in a.edges:
        for y in range(b.n):
            edges.append((u * b.n + y, v * b.n + y))
    return Graph(a.n * b.n, edges)


def disjoint_union(graphs: Sequence[Graph]) -> tuple[Graph, list[int]]:
    """Disjoint union; returns the graph and each part's id offset."""
    offsets, edges, labels = [], [], {}
    total = 0
    for g in graphs:
        offsets.append(total)
        edges.extend((u + total, v + total) for u, v in g.edges)
        labels.update({v + total: t for v, t in g.labels.items()})
        total += g.n
    return Graph(total, edges, labels), offsets


@dataclass(frozen=True)
class DistanceField:
    """Distances from a source set; unreachable vertices carry ``INF``."""

    sources: frozenset[int]
    values: tuple[float, ...]

    def __getitem__(self, v: int) -> float:
        return self.values[v]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)

    def level(self, r: int) -> list[int]:
        return [v for v, d in enumerate(self.values) if d == r]

    def within(self, r: float) -> list[int]:
        return [v for v, d in enumerate(self.values) if d <= r]

    def max_finite(self) -> int:
        return int(max((d for d in self.values if d != INF), default=0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["vertex", "distance"])
        for v, d in enumerate(self.values):
            w.writerow([v, "inf" if d == INF else int(d)])
        return buf.getvalue()


def distances(graph: Graph, sources: Iterable[int]) -> DistanceField:
    src = frozenset(int(s) for s in sources)
    if not src:
        raise GraphError("source set must be nonempty")
    bad = [s for s in src if not 0 <= s < graph.n]
    if bad:
        raise GraphError(f"sources outside the graph: {sorted(bad)[:5]}")
    return DistanceField(src, tuple(graph.bfs(sorted(src))))


def sphere_and_tube(
    graph: Graph, W: Iterable[int], K: int
) -> tuple[frozenset[int], frozenset[int], frozenset[int]]:
    """Return ``(shell, open tube, closed neighbourhood)`` of ``W`` at radius ``K``."""
    if K < 0 or int(K) != K:
        raise GraphError("K must be a non-negative integer")
    d = distances(graph, W)
    shell = frozenset(v for v, x in enumerate(d) if x == K)
    tube = frozenset(v for v, x in enumerate(d) if x < K)
    return shell, tube, shell | tube


@dataclass(frozen=True)
class PointedBall:
    """A ball ``B(center, radius)`` materialized as its own graph.

    ``names`` maps local ids back to generator vertex names when the ball
    came from a :class:`~drillbench.spaces.SpaceGenerator`.
    """

    graph: Graph
    center: int
    radius: int
    names: tuple | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise GraphError("radius must be non-negative")
        d = self.graph.bfs([self.center])
        if any(x > self.radius for x in d):
            raise GraphError("ball contains a vertex beyond its radius")

    def index_of(self, name) -> int:
        if self.names is None:
            raise GraphError("ball carries no generator names")
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None


def ball_around(graph: Graph, center: int, radius: int) -> PointedBall:
    """Induced ball in a finite graph, recentred in local ids."""
    d = graph.bfs([center])
    sub, keep = graph.induced(v for v, x in enumerate(d) if x <= radius)
    return PointedBall(sub, keep.index(center), radius, tuple(keep))
