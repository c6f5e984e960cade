"""Combinatorial horoballs and their bounded-valence variant."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coarse import csc_check
from .graph import Graph, GraphError
from .report import Report


@dataclass
class Horoball:
    """Truncated horoball over ``base``; vertex ``(v, n)`` has id ``n * base.n + v``.

    ``saturated`` is true when the deepest level is already a complete graph,
    in which case deeper levels cannot shorten any path and the truncation
    is exact.
    """

    base: Graph
    depth_max: int
    graph: Graph
    saturated: bool
    base_dist: np.ndarray = field(repr=False)

    def vid(self, v: int, n: int) -> int:
        return n * self.base.n + v

    def depth(self, x: int) -> int:
        return x // self.base.n

    def base_vertex(self, x: int) -> int:
        return x % self.base.n

    def to_dict(self) -> dict:
        d = self.graph.to_dict()
        d["depth"] = [self.depth(x) for x in range(self.graph.n)]
        d["base"] = [self.base_vertex(x) for x in range(self.graph.n)]
        return d


def horoball_edges(base_dist: np.ndarray, depth_max: int, offset=None) -> list[tuple[int, int]]:
    """Edge list of the horoball over a base with distance matrix ``base_dist``."""
    nb = base_dist.shape[0]
    edges: list[tuple[int, int]] = []
    iu, ju = np.triu_indices(nb, 1)
    dvals = base_dist[iu, ju]
    for n in range(depth_max + 1):
        sel = dvals <= 2 ** n
        lo = n * nb
        edges.extend(zip((iu[sel] + lo).tolist(), (ju[sel] + lo).tolist()))
        if n < depth_max:
            edges.extend((lo + v, lo + nb + v) for v in range(nb))
    return edges


def build_horoball(base: Graph, depth_max: int) -> Horoball:
    """Horizontal edge ``(x,n)-(y,n)`` iff ``1 <= d(x,y) <= 2^n``; vertical edges between levels."""
    if depth_max < 0:
        raise GraphError("depth_max must be non-negative")
    if not base.is_connected():
        raise GraphError("horoball base must be connected")
    dist = base.distance_matrix()
    nb = base.n
    edges = horoball_edges(dist, depth_max)
    saturated = nb <= 1 or int(dist.max()) <= 2 ** depth_max
    frontier = () if saturated else range(depth_max * nb, (depth_max + 1) * nb)
    labels = {n * nb + v: f"horoball:{n}" for n in range(depth_max + 1) for v in range(nb)}
    g = Graph(nb * (depth_max + 1), edges, labels, frontier)
    return Horoball(base, depth_max, g, saturated, dist)


def required_depth(diameter: int) -> int:
    """Least depth with ``depth >= log2(diameter) + 2``."""
    if diameter <= 1:
        return 2
    k = 0
    while 2 ** k < diameter:
        k += 1
    return k + 2


def distortion_audit(h: Horoball) -> Report:
    """Check ``d_H/2 - 2 < log2 d < d_H/2 + 1`` for all distinct base pairs.

    Both inequalities are decided in integers: the lower one is
    ``16 d^2 > 2^{d_H}``, the upper one ``d^2 < 2^{d_H + 2}``.
    """
    bd = h.base_dist
    diam = int(bd.max()) if h.base.n > 1 else 0
    need = required_depth(diam)
    details = {"depth_max": h.depth_max, "base_diameter": diam, "required_depth": need}
    if h.depth_max < need:
        return Report("horoball-distortion", "inconclusive",
                      {**details, "reason": "depth_max below log2(diameter) + 2"})
    nb = h.base.n
    dh = h.graph.distance_rows(list(range(nb)))[:, :nb].astype(np.int64)
    worst = None
    pairs = 0
    small_ok = True
    small_witness = None
    for v in range(nb):
        for w in range(v + 1, nb):
            d, e = int(bd[v, w]), int(dh[v, w])
            pairs += 1
            if not (16 * d * d > 2 ** e and d * d < 2 ** (e + 2)):
                worst = worst or {"v": v, "w": w, "d_base": d, "d_horoball": e}
            if d < 6 and e != d and small_ok:
                small_ok = False
                small_witness = {"v": v, "w": w, "d_base": d, "d_horoball": e}
    details.update({"pairs": pairs, "short_distances_preserved": small_ok})
    if small_witness:
        details["short_distance_witness"] = small_witness
    if worst:
        return Report("horoball-distortion", "fail", details, witness=worst)
    return Report("horoball-distortion", "pass", details)


def short_distance_audit(h: Horoball, bound: int = 6) -> Report:
    """``d_base < bound`` implies the horoball distance equals the base distance."""
    nb = h.base.n
    bd = h.base_dist
    dh = h.graph.distance_rows(list(range(nb)))[:, :nb]
    mask = bd < bound
    bad = np.argwhere(mask & (dh != bd))
    if len(bad):
        v, w = bad[0].tolist()
        return Report("horoball-short-distances", "fail", {"bound": bound},
                      witness={"v": v, "w": w, "d_base": int(bd[v, w]), "d_horoball": int(dh[v, w])})
    return Report("horoball-short-distances", "pass",
                  {"bound": bound, "pairs": int(mask.sum() - nb) // 2})


def horoball_csc_audit(h: Horoball, D: int = 5) -> Report:
    if D < 5:
        raise GraphError("the horoball is only claimed simply connected at scale D >= 5")
    rep = csc_check(h.graph, D, cross_check=False)
    rep.name = "horoball-simple-connectivity"
    return rep


# ---------------------------------------------------------------------------
# bounded valence


@dataclass
class BVHoroball:
    """Nets ``V_n`` with horizontal and vertical edges; vertex ids by level."""

    base: Graph
    depth_max: int
    nets: list[list[int]]
    graph: Graph
    offsets: list[int]

    def vid(self, v: int, n: int) -> int:
        return self.offsets[n] + self.nets[n].index(v)

    def level_of(self, x: int) -> tuple[int, int]:
        for n in range(self.depth_max, -1, -1):
            if x >= self.offsets[n]:
                return self.nets[n][x - self.offsets[n]], n
        raise IndexError(x)


def greedy_net(dist: np.ndarray, radius: float, order: list[int]) -> list[int]:
    """Maximal subset with pairwise distance >= radius, greedy in ``order``."""
    chosen: list[int] = []
    for v in order:
        if not chosen or dist[v, chosen].min() >= radius:
            chosen.append(v)
    return sorted(chosen)


def build_bv_horoball(base: Graph, depth_max: int, net_seed: int | None = None) -> BVHoroball:
    """Nets at separation ``2^{n-1}``; edges for distances below ``2^{n+1}``.

    ``net_seed`` permutes the greedy order; ``None`` keeps vertex order.
    """
    if not base.is_connected():
        raise GraphError("base must be connected")
    dist = base.distance_matrix()
    order = list(range(base.n))
    if net_seed is not None:
        order = np.random.default_rng(net_seed).permutation(base.n).tolist()
    nets = [list(range(base.n))]
    for n in range(1, depth_max + 1):
        nets.append(greedy_net(dist, 2 ** (n - 1), order))
    offsets = []
    total = 0
    for net in nets:
        offsets.append(total)
        total += len(net)
    edges = []
    for n, net in enumerate(nets):
        for i, v in enumerate(net):
            for j in range(i + 1, len(net)):
                if dist[v, net[j]] < 2 ** (n + 1):
                    edges.append((offsets[n] + i, offsets[n] + j))
            if n < depth_max:
                for j, w in enumerate(nets[n + 1]):
                    if dist[v, w] < 2 ** (n + 1):
                        edges.append((offsets[n] + i, offsets[n + 1] + j))
    return BVHoroball(base, depth_max, nets, Graph(total, edges), offsets)


def bv_audit(bv: BVHoroball, growth: tuple[float, float, int] | None = None) -> Report:
    """Net conditions, valence, and the quasi-isometry constants of the comparison maps.

    ``phi(v in V_n) = (v, n)``; ``psi(v, n)`` is the closest net point (least
    id on ties).  Checked: phi 2-Lipschitz, psi 6-Lipschitz, psi o phi = id
    and phi o psi moves points at most 1.
    """
    base = bv.base
    dist = base.distance_matrix()
    for n, net in enumerate(bv.nets):
        sep = 2 ** (n - 1) if n else 0.5
        sub = dist[np.ix_(net, net)]
        if len(net) > 1 and (sub + np.eye(len(net), dtype=int) * 10 ** 9).min() < sep:
            return Report("bv-horoball", "fail", {"reason": f"level {n} not separated"})
        if dist[:, net].min(axis=1).max() >= sep:
            return Report("bv-horoball", "fail", {"reason": f"level {n} does not cover"})
    h = build_horoball(base, bv.depth_max)
    dh = h.graph.distance_matrix()
    db = bv.graph.distance_matrix()
    phi = []
    for x in range(bv.graph.n):
        v, n = bv.level_of(x)
        phi.append(h.vid(v, n))
    psi = []
    for x in range(h.graph.n):
        v, n = h.base_vertex(x), h.depth(x)
        net = bv.nets[n]
        best = min(net, key=lambda u: (dist[v, u], u))
        psi.append(bv.vid(best, n))
    phi_lip = max((int(dh[phi[a], phi[b]]) for a, b in bv.graph.edges), default=0)
    psi_lip = max((int(db[psi[a], psi[b]]) for a, b in h.graph.edges), default=0)
    psi_phi = all(psi[phi[x]] == x for x in range(bv.graph.n))
    phi_psi = max(int(dh[phi[psi[x]], x]) for x in range(h.graph.n))
    valence = bv.graph.max_degree()
    details = {"max_valence": valence, "phi_lipschitz": phi_lip, "psi_lipschitz": psi_lip,
               "psi_phi_identity": psi_phi, "phi_psi_displacement": phi_psi,
               "net_sizes": [len(n) for n in bv.nets]}
    if growth is not None:
        c, C, d = growth
        details["valence_bound"] = (16 ** d + 32 ** d + 16 ** d) * C / c
    ok = phi_lip <= 2 and psi_lip <= 6 and psi_phi and phi_psi <= 1
    return Report("bv-horoball", "pass" if ok else "fail", details)
