"""Shells, tubes, completed shells and tube complements, and far-point projections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coarse import Retraction, classify_small, pi1D_presentation, retraction_axioms
from .graph import Graph, GraphError, sphere_and_tube
from .iso import set_preserving_isomorphism
from .report import Report


def scale_floor(delta: Fraction | float) -> int:
    """Completion scale ``max(1, ceil(8 delta))``."""
    return max(1, math.ceil(8 * Fraction(delta)))


@dataclass
class CompletedShell:
    """Shell vertices plus subdivided arcs realizing ambient distances up to ``s``.

    Local ids: shell vertices first (in ambient id order), then arc interiors.
    """

    ambient: Graph
    W: frozenset[int]
    K: int
    s: int
    shell: list[int]
    graph: Graph
    arcs: list[tuple[int, int, list[int]]]
    ambient_of: list[int]  # -1 for arc interior vertices

    @property
    def n_shell(self) -> int:
        return len(self.shell)

    def components(self) -> list[list[int]]:
        return self.graph.components()

    def is_connected(self) -> bool:
        return self.graph.n > 0 and self.graph.is_connected()


def _shell_pairs(ambient: Graph, shell: Sequence[int], s: int) -> list[tuple[int, int, int]]:
    index = {v: i for i, v in enumerate(shell)}
    out = []
    for i, a in enumerate(shell):
        # truncated BFS to radius s
        dist = {a: 0}
        layer = [a]
        for r in range(1, s + 1):
            nxt = []
            for u in layer:
                for w in ambient.adj[u]:
                    if w not in dist:
                        dist[w] = r
                        nxt.append(w)
            layer = nxt
        for b, d in dist.items():
            j = index.get(b)
            if j is not None and j > i:
                out.append((i, j, d))
    return sorted(out)


def completed_shell(graph: Graph, W: Iterable[int], K: int, s: int) -> CompletedShell:
    """Join every pair of shell points at ambient distance ``<= s`` by a path of that length."""
    W = frozenset(W)
    if K < 0:
        raise GraphError("K must be non-negative")
    if s < 1:
        raise GraphError("scale s must be at least 1")
    shell_set, _, _ = sphere_and_tube(graph, W, K)
    shell = sorted(shell_set)
    n = len(shell)
    edges = []
    arcs = []
    nxt = n
    for i, j, d in _shell_pairs(graph, shell, s):
        inner = list(range(nxt, nxt + d - 1))
        nxt += d - 1
        chain = [i, *inner, j]
        edges.extend(zip(chain, chain[1:]))
        arcs.append((i, j, inner))
    labels = {v: "shell" for v in range(n)}
    labels.update({v: "arc" for v in range(n, nxt)})
    cs = Graph(nxt, edges, labels)
    ambient_of = shell + [-1] * (nxt - n)
    return CompletedShell(graph, W, K, s, shell, cs, arcs, ambient_of)


@dataclass
class CompletedTubeComplement:
    """Ambient graph minus the open tube, glued to the completed shell along the shell."""

    cs: CompletedShell
    graph: Graph
    ambient_of: list[int]  # -1 for arc interiors
    of_ambient: dict[int, int]
    cs_ids: list[int]  # CTC id of each completed-shell vertex (local cs id order)

    @property
    def shell_ids(self) -> list[int]:
        return self.cs_ids[: self.cs.n_shell]

    def components(self) -> list[list[int]]:
        return self.graph.components()


def completed_tube_complement(graph: Graph, W: Iterable[int], K: int, s: int,
                              cs: CompletedShell | None = None) -> CompletedTubeComplement:
    W = frozenset(W)
    if cs is None:
        cs = completed_shell(graph, W, K, s)
    d = graph.bfs(W)
    outside = [v for v in range(graph.n) if d[v] >= K]
    of_ambient = {v: i for i, v in enumerate(outside)}
    n_out = len(outside)
    cs_ids = [of_ambient[a] for a in cs.shell] + list(range(n_out, n_out + cs.graph.n - cs.n_shell))
    edges = [(of_ambient[u], of_ambient[v]) for u, v in graph.edges
             if u in of_ambient and v in of_ambient]
    edges.extend((cs_ids[u], cs_ids[v]) for u, v in cs.graph.edges)
    labels = {i: "ambient" for i in range(n_out)}
    for i in cs.shell:
        labels[of_ambient[i]] = "shell"
    for i in range(n_out, len(labels) + cs.graph.n - cs.n_shell):
        labels[i] = "arc"
    frontier = {of_ambient[v] for v in graph.frontier if v in of_ambient}
    total = n_out + cs.graph.n - cs.n_shell
    ambient_of = outside + [-1] * (total - n_out)
    g = Graph(total, edges, labels, frontier)
    return CompletedTubeComplement(cs, g, ambient_of, of_ambient, cs_ids)


def shell_connectivity_audit(cs: CompletedShell, s: int | None = None) -> Report:
    """Raw shell ``s``-path connected and completed shell connected."""
    s = cs.s if s is None else s
    if cs.n_shell == 0:
        return Report("shell-connectivity", "inconclusive", {"reason": "empty shell"})
    if cs.K == 0:
        sub, _ = cs.ambient.induced(cs.shell)
        ok = sub.is_connected()
        return Report("shell-connectivity", "pass" if ok else "fail",
                      {"K": 0, "components": len(sub.components())})
    comps = cs.components()
    shell_comps = [sorted(v for v in c if v < cs.n_shell) for c in comps]
    shell_comps = [c for c in shell_comps if c]
    details = {"K": cs.K, "s": s, "shell_size": cs.n_shell,
               "completed_components": len(comps), "shell_components": len(shell_comps),
               "component_sizes": sorted((len(c) for c in shell_comps), reverse=True)[:20]}
    if len(comps) == 1:
        return Report("shell-connectivity", "pass", details)
    a, b = shell_comps[0], shell_comps[1]
    witness = {"component_a_sample": [cs.shell[i] for i in a[:10]],
               "component_b_sample": [cs.shell[i] for i in b[:10]],
               "gap": _component_gap(cs, a, b)}
    return Report("shell-connectivity", "fail", details, witness=witness)


def _component_gap(cs: CompletedShell, a: Sequence[int], b: Sequence[int]) -> int | str:
    d = cs.ambient.bfs([cs.shell[i] for i in a])
    gap = min(d[cs.shell[i]] for i in b)
    return "inf" if gap == math.inf else int(gap)


def phi_estimate(graph: Graph, W: Iterable[int], K: int, s: int, C: int,
                 cs: CompletedShell | None = None) -> Fraction | str:
    """Worst completed-shell distance over shell pairs within ambient distance ``C``."""
    if cs is None:
        cs = completed_shell(graph, W, K, s)
    n = cs.n_shell
    if n == 0:
        return Fraction(0)
    amb = graph.distance_rows(cs.shell)[:, cs.shell]
    inner = cs.graph.distance_rows(list(range(n)))[:, :n]
    mask = (amb <= C) & (amb > 0)
    if not mask.any():
        return Fraction(0)
    vals = inner[mask]
    if np.isinf(vals).any():
        return "unbounded"
    return Fraction(int(vals.max()))


# ---------------------------------------------------------------------------
# projections from far points


@dataclass
class ShellProjection:
    """Far-point projections onto the ``K``-shell from basepoint ``w0``.

    Far points are vertices at distance ``>= horizon`` from ``W`` (default
    ``3K``); rays are lexicographically least geodesics from ``w0``.
    """

    graph: Graph
    W: frozenset[int]
    K: int
    w0: int
    horizon: int
    dist_W: list[float] = field(repr=False)

    @property
    def far_points(self) -> list[int]:
        return [v for v, d in enumerate(self.dist_W) if d != math.inf and d >= self.horizon]

    def ray(self, p: int) -> list[int]:
        return self.graph.geodesic(self.w0, p)


def shell_projection(graph: Graph, W: Iterable[int], K: int, w0: int | None = None,
                     horizon: int | None = None) -> ShellProjection:
    W = frozenset(W)
    if w0 is None:
        w0 = min(W)
    if w0 not in W:
        raise GraphError("basepoint must lie on W")
    return ShellProjection(graph, W, K, w0, 3 * K if horizon is None else horizon, graph.bfs(W))


def project_far_point(proj: ShellProjection, p: int, w: int | None = None,
                      ray: Sequence[int] | None = None) -> int:
    """Last vertex at distance exactly ``K`` from ``W`` on the chosen ray to ``p``."""
    if proj.dist_W[p] < proj.K:
        raise GraphError(f"vertex {p} lies inside the tube")
    if ray is None:
        ray = proj.graph.geodesic(proj.w0 if w is None else w, p)
    last = None
    for v in ray:
        if proj.dist_W[v] == proj.K:
            last = v
    if last is None:
        raise GraphError("ray never meets the shell")
    return last


def projection_candidates(proj: ShellProjection, p: int, basepoints: Iterable[int] | None = None,
                          dist: np.ndarray | None = None) -> set[int]:
    """Every value of the projection over all basepoints on ``W`` and all geodesic rays."""
    g = proj.graph
    if dist is None:
        dist = g.distance_matrix()
    K = proj.K
    dW = proj.dist_W
    dp = dist[p]
    # good(y): from y one can reach p along p-ward geodesic steps avoiding the shell
    order = np.argsort(dp, kind="stable")
    good = np.zeros(g.n, dtype=bool)
    for y in order.tolist():
        if dW[y] == K:
            continue
        if y == p or any(good[z] and dp[z] == dp[y] - 1 for z in g.adj[y]):
            good[y] = True
    out: set[int] = set()
    for w in sorted(proj.W if basepoints is None else basepoints):
        dw = dist[w]
        total = dw[p]
        on = np.nonzero(dw + dp == total)[0]
        for x in on.tolist():
            if dW[x] != K:
                continue
            if any(good[z] and dp[z] == dp[x] - 1 and dw[z] == dw[x] + 1 for z in g.adj[x]):
                out.add(x)
    return out


def projection_stability_audit(proj: ShellProjection, delta: Fraction, points: Iterable[int] | None = None,
                               dist: np.ndarray | None = None) -> Report:
    """Variation of the projection over basepoints and rays, against ``8 delta``."""
    g = proj.graph
    if dist is None:
        dist = g.distance_matrix()
    pts = proj.far_points if points is None else list(points)
    worst, worst_diam, witness = 0, 0, None
    for p in pts:
        canon = project_far_point(proj, p)
        cands = projection_candidates(proj, p, dist=dist)
        cands.add(canon)
        arr = np.array(sorted(cands))
        spread = int(dist[canon, arr].max())
        diam = int(dist[np.ix_(arr, arr)].max())
        worst_diam = max(worst_diam, diam)
        if spread > worst:
            worst = spread
            witness = {"far_point": p, "canonical": canon,
                       "farthest_variant": int(arr[np.argmax(dist[canon, arr])])}
    bound = 8 * Fraction(delta)
    details = {"far_points": len(pts), "max_shift": worst, "max_variant_diameter": worst_diam,
               "bound": bound, "delta": Fraction(delta)}
    return Report("projection-stability", "pass" if worst <= bound else "fail", details,
                  witness=witness)


def coarse_surjectivity_audit(proj: ShellProjection, delta: Fraction,
                              dist: np.ndarray | None = None) -> Report:
    """Every shell vertex lies within ``8 delta`` of some far-point projection."""
    g = proj.graph
    if dist is None:
        dist = g.distance_matrix()
    shell = [v for v, d in enumerate(proj.dist_W) if d == proj.K]
    far = proj.far_points
    if not far or not shell:
        return Report("projection-coarse-surjectivity", "inconclusive",
                      {"reason": "no far points or empty shell"})
    images = sorted({project_far_point(proj, p) for p in far})
    slack_per = dist[np.ix_(shell, images)].min(axis=1)
    i = int(np.argmax(slack_per))
    slack = int(slack_per[i])
    bound = 8 * Fraction(delta)
    return Report("projection-coarse-surjectivity", "pass" if slack <= bound else "fail",
                  {"slack": slack, "bound": bound, "shell_size": len(shell),
                   "image_size": len(images)}, witness={"shell_vertex": shell[i]})


def straightness_audit(proj: ShellProjection, delta: Fraction, dist: np.ndarray | None = None) -> Report:
    """Along rays from ``W`` to far points, near-shell points stay near the crossing."""
    g = proj.graph
    if dist is None:
        dist = g.distance_matrix()
    shell = [v for v, d in enumerate(proj.dist_W) if d == proj.K]
    if not shell:
        return Report("ray-straightness", "inconclusive", {"reason": "empty shell"})
    to_shell = dist[shell].min(axis=0)
    worst = 0
    for w in sorted(proj.W):
        for p in proj.far_points:
            ray = g.geodesic(w, p)
            crossing = [v for v in ray if proj.dist_W[v] == proj.K]
            near = [v for v in ray if to_shell[v] <= 2 * delta]
            for y in crossing:
                worst = max(worst, int(dist[y, near].max()))
    bound = 6 * Fraction(delta)
    return Report("ray-straightness", "pass" if worst <= bound else "fail",
                  {"max_distance": worst, "bound": bound})


def tube_quasiconvexity_audit(graph: Graph, W: Iterable[int], K: int, delta: Fraction,
                              dist: np.ndarray | None = None) -> Report:
    """Every geodesic between tube points stays within ``2 delta`` of the tube."""
    if dist is None:
        dist = graph.distance_matrix()
    _, tube, _ = sphere_and_tube(graph, W, K)
    t = np.array(sorted(tube))
    if len(t) == 0:
        return Report("tube-quasiconvexity", "inconclusive", {"reason": "empty tube"})
    to_tube = dist[t].min(axis=0)
    worst = 0
    for a in range(len(t)):
        da = dist[t[a]]
        for b in range(a + 1, len(t)):
            on = da + dist[t[b]] == da[t[b]]
            worst = max(worst, int(to_tube[on].max()))
    bound = 2 * Fraction(delta)
    return Report("tube-quasiconvexity", "pass" if worst <= bound else "fail",
                  {"max_excursion": worst, "bound": bound})


def project_boundary_path(proj: ShellProjection, cs: CompletedShell, samples: Sequence[int],
                          delta: Fraction, closed: bool = False) -> list[int]:
    """Shell path (completed-shell ids) through the projections of a far-point path.

    Consecutive projections must be within ``8 delta``; otherwise the
    sampling is too coarse and an error asks for refinement.
    """
    if not samples:
        raise GraphError("empty sample path")
    local = {a: i for i, a in enumerate(cs.shell)}
    proj_pts = [project_far_point(proj, p) for p in samples]
    if closed:
        proj_pts.append(proj_pts[0])
    amb = proj.graph
    bound = 8 * Fraction(delta)
    for i, (a, b) in enumerate(zip(proj_pts, proj_pts[1:])):
        if amb.bfs([a])[b] > bound:
            raise GraphError(f"samples {i} and {i + 1} project too far apart; refine the path")
    pts = [local[a] for a in proj_pts]
    out = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        if a == b:
            continue
        out.extend(cs.graph.geodesic(a, b)[1:])
    return out


def hausdorff(graph: Graph, a: Sequence[int], b: Sequence[int]) -> int:
    da = graph.distance_rows(sorted(set(a)))
    db = graph.distance_rows(sorted(set(b)))
    return int(max(da.min(axis=0)[list(b)].max(), db.min(axis=0)[list(a)].max()))


# ---------------------------------------------------------------------------
# tube comparability


def tube_comparable(a: tuple[Graph, Iterable[int]], b: tuple[Graph, Iterable[int]],
                    alpha: int) -> tuple[Report, dict[int, int] | None]:
    """Isomorphism of closed ``alpha``-neighbourhoods carrying one core onto the other."""
    if alpha < 1:
        raise GraphError("alpha must be at least 1")
    (ga, wa), (gb, wb) = a, b
    wa, wb = frozenset(wa), frozenset(wb)
    _, _, na = sphere_and_tube(ga, wa, alpha)
    _, _, nb = sphere_and_tube(gb, wb, alpha)
    truncated = any(v in ga.frontier for v in na if ga.bfs(wa)[v] < alpha) or \
        any(v in gb.frontier for v in nb if gb.bfs(wb)[v] < alpha)
    sa, ka = ga.induced(na)
    sb, kb = gb.induced(nb)
    la = {v: i for i, v in enumerate(ka)}
    lb = {v: i for i, v in enumerate(kb)}
    m = set_preserving_isomorphism(sa, {la[v] for v in wa}, sb, {lb[v] for v in wb})
    details = {"alpha": alpha, "sizes": [sa.n, sb.n], "truncation_touched": truncated}
    if m is None:
        return Report("tube-comparability", "fail", details), None
    mapping = {ka[i]: kb[j] for i, j in m.items()}
    verdict = "inconclusive" if truncated else "pass"
    return Report("tube-comparability", verdict, details), mapping


# ---------------------------------------------------------------------------
# retraction of the tube complement onto the completed shell


def ctc_retraction(ctc: CompletedTubeComplement, ambient_retraction: Retraction,
                   Q: Fraction | int, check: bool = True) -> Retraction:
    """Restrict an ambient retraction onto the closed K-neighbourhood to the tube complement.

    Completed-shell vertices stay fixed; other vertices follow the ambient
    maps, which never enter the open tube.
    """
    cs_set = set(ctc.cs_ids)
    maps = []
    for amb_map in ambient_retraction.maps:
        f = []
        for x in range(ctc.graph.n):
            if x in cs_set:
                f.append(x)
            else:
                f.append(ctc.of_ambient[amb_map[ctc.ambient_of[x]]])
        maps.append(f)
    r = Retraction(ctc.graph, frozenset(cs_set), maps, Q)
    if check:
        rep = retraction_axioms(r)
        if not rep.passed:
            raise GraphError(f"tube-complement retraction axioms fail: {rep.witness}")
    return r


def angular_loop(points: Iterable[int], coords: Mapping[int, tuple[float, float]] | Sequence,
                 center: tuple[float, float] = (0.0, 0.0)) -> list[int]:
    """Order points by angle around ``center`` (ties broken by id)."""
    cx, cy = center
    return sorted(points, key=lambda v: (round(math.atan2(coords[v][1] - cy, coords[v][0] - cx), 9), v))


def far_sphere_loop(proj: ShellProjection, coords, radius: int | None = None,
                    center: tuple[float, float] = (0.0, 0.0), stride: int = 1) -> list[int]:
    """Angularly ordered far points at distance exactly ``radius`` from ``W``."""
    radius = proj.horizon if radius is None else radius
    pts = [v for v, d in enumerate(proj.dist_W) if d == radius]
    return angular_loop(pts, coords, center)[::stride]


def shell_loop_winding(cs: CompletedShell, loop: Sequence[int], D: int) -> tuple[Report, int | None]:
    """Class of a closed completed-shell walk under the map of its D-fundamental group onto Z."""
    pres = pi1D_presentation(cs.graph, D, basepoint=loop[0])
    verdict = classify_small(pres)
    details = {"D": D, "group": verdict.kind, "loop_length": len(loop) - 1}
    if verdict.kind != "infinite-cyclic":
        return Report("shell-loop-winding", "inconclusive", details), None
    hom = verdict.z_hom(pres.n_gens)
    word = pres.walk_word(loop)
    winding = sum(hom[abs(c) - 1] * (1 if c > 0 else -1) for c in word)
    details["winding"] = winding
    return Report("shell-loop-winding", "pass" if winding else "fail", details), winding
