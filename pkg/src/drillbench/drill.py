"""Cusping, unwrap-and-glue, ball and local-model audits, separated families and iteration."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .coarse import CoverTruncation, classify_small, pi1D_presentation, z_cover
from .graph import Graph, GraphError, ball_around, sphere_and_tube
from .horoballs import Horoball, build_horoball, horoball_edges
from .hyperbolicity import Certificate, PathFamily, certify_guess_geodesics, lex_geodesic
from .iso import pointed_isomorphic, set_preserving_isomorphism
from .report import Report, combine
from .shells import (
    CompletedTubeComplement,
    completed_tube_complement,
    tube_comparable,
)


def _bfs_limited(graph: Graph, src: int, limit: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if dist[u] == limit:
            continue
        for w in graph.adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def _frontier_distance(graph: Graph, src: int, limit: int) -> float:
    """Distance from ``src`` to the truncation frontier, or inf if beyond ``limit``."""
    if not graph.frontier:
        return math.inf
    for v, d in sorted(_bfs_limited(graph, src, limit).items(), key=lambda t: t[1]):
        if v in graph.frontier:
            return d
    return math.inf


# ---------------------------------------------------------------------------
# cusped spaces


@dataclass
class CuspedSpace:
    """Tube complement with a truncated horoball glued along the completed shell.

    Ids: tube-complement vertices first, then horoball level ``n >= 1`` over
    completed-shell vertex ``v`` at ``m + (n - 1) * ncs + v``.
    """

    ambient: Graph
    W: frozenset[int]
    K: int
    s: int
    ctc: CompletedTubeComplement
    horoball: Horoball
    graph: Graph

    @property
    def m(self) -> int:
        return self.ctc.graph.n

    @property
    def ncs(self) -> int:
        return self.ctc.cs.graph.n

    def depth(self, x: int) -> int:
        return 0 if x < self.m else (x - self.m) // self.ncs + 1

    def vid(self, v_cs: int, n: int) -> int:
        """Cusp id of completed-shell vertex ``v_cs`` at depth ``n``."""
        return self.ctc.cs_ids[v_cs] if n == 0 else self.m + (n - 1) * self.ncs + v_cs

    def cs_vertex(self, x: int) -> int | None:
        if x >= self.m:
            return (x - self.m) % self.ncs
        return self._cs_local.get(x)

    @cached_property
    def _cs_local(self) -> dict[int, int]:
        return {c: i for i, c in enumerate(self.ctc.cs_ids)}

    def in_horoball(self, x: int) -> bool:
        return x >= self.m or x in self._cs_set

    @cached_property
    def _cs_set(self) -> set[int]:
        return set(self.ctc.cs_ids)

    def horoball_id(self, x: int) -> int:
        """Id of ``x`` inside the standalone horoball graph."""
        v = self.cs_vertex(x)
        return self.depth(x) * self.ncs + v


def cusp(graph: Graph, W: Iterable[int], K: int, s: int, depth_max: int) -> CuspedSpace:
    """Glue a horoball over the completed shell onto the completed tube complement."""
    W = frozenset(W)
    ctc = completed_tube_complement(graph, W, K, s)
    cs = ctc.cs
    if not cs.is_connected():
        raise GraphError("completed shell is disconnected; the horoball cannot be glued")
    h = build_horoball(cs.graph, depth_max)
    m, ncs = ctc.graph.n, cs.graph.n

    def to_cusp(x: int) -> int:
        n, v = divmod(x, ncs)
        return ctc.cs_ids[v] if n == 0 else m + (n - 1) * ncs + v

    edges = list(ctc.graph.edges)
    for a, b in h.graph.edges:
        if a >= ncs or b >= ncs:
            edges.append((to_cusp(a), to_cusp(b)))
    labels = {}
    for x in range(m):
        labels[x] = "complement" if ctc.graph.labels.get(x) == "ambient" else "shell"
    for n in range(1, depth_max + 1):
        for v in range(ncs):
            labels[m + (n - 1) * ncs + v] = f"horoball:{n}"
    frontier = set(ctc.graph.frontier)
    frontier.update(to_cusp(x) for x in h.graph.frontier)
    g = Graph(m + depth_max * ncs, edges, labels, frontier)
    return CuspedSpace(graph, W, K, s, ctc, h, g)


def cusp_counts(c: CuspedSpace) -> dict:
    """Vertex/edge bookkeeping: parts minus the shared interface."""
    cs = c.ctc.cs.graph
    return {"ctc": [c.ctc.graph.n, c.ctc.graph.num_edges],
            "horoball": [c.horoball.graph.n, c.horoball.graph.num_edges],
            "interface": [cs.n, cs.num_edges],
            "cusp": [c.graph.n, c.graph.num_edges],
            "reconciles": c.graph.n == c.ctc.graph.n + c.horoball.graph.n - cs.n
            and c.graph.num_edges == c.ctc.graph.num_edges + c.horoball.graph.num_edges - cs.num_edges}


def cusp_path_family(c: CuspedSpace) -> PathFamily:
    """Paths built from ambient geodesics, closest shell points and horoball geodesics.

    Both ends outside the horoball: the ambient geodesic if it avoids the
    open tube, otherwise detour through the closest shell points and a
    horoball geodesic.  Both inside: a horoball geodesic.  Mixed: ambient
    geodesic to the closest shell point, then a horoball geodesic.  Adjacent
    pairs always get the edge.
    """
    amb = c.ambient
    ctc = c.ctc
    adist = amb.distance_matrix()
    hgraph = c.horoball.graph
    hdist = hgraph.distance_matrix()
    dW = adist[sorted(c.W)].min(axis=0)
    shell_amb = np.array(ctc.cs.shell)
    n = c.graph.n
    h_to_cusp = [c.vid(v % c.ncs, v // c.ncs) for v in range(hgraph.n)]
    cs_set = set(ctc.cs_ids)
    outside = [x for x in range(n) if x < c.m and x not in cs_set]
    amb_of = ctc.ambient_of
    closest: dict[int, int] = {}
    for x in outside:
        row = adist[amb_of[x], shell_amb]
        closest[x] = int(shell_amb[np.flatnonzero(row == row.min())[0]])

    def amb_path(a: int, b: int) -> list[int]:
        return [ctc.of_ambient[v] for v in lex_geodesic(adist, amb, a, b)]

    def h_path(a: int, b: int) -> list[int]:
        return [h_to_cusp[v] for v in lex_geodesic(hdist, hgraph, c.horoball_id(a), c.horoball_id(b))]

    def to_shell(x: int) -> list[int]:
        return amb_path(amb_of[x], closest[x])

    paths: dict[tuple[int, int], list[int]] = {}
    out_set = set(outside)
    for x in range(n):
        for y in range(x + 1, n):
            if c.graph.has_edge(x, y):
                paths[(x, y)] = [x, y]
                continue
            xo, yo = x in out_set, y in out_set
            if xo and yo:
                geo = lex_geodesic(adist, amb, amb_of[x], amb_of[y])
                if all(dW[v] >= c.K for v in geo):
                    paths[(x, y)] = [ctc.of_ambient[v] for v in geo]
                    continue
                px, py = to_shell(x), to_shell(y)
                mid = h_path(px[-1], py[-1])
                paths[(x, y)] = px + mid[1:] + py[::-1][1:]
            elif not xo and not yo:
                paths[(x, y)] = h_path(x, y)
            elif xo:
                px = to_shell(x)
                paths[(x, y)] = px + h_path(px[-1], y)[1:]
            else:
                py = to_shell(y)
                paths[(x, y)] = h_path(x, py[-1]) + py[::-1][1:]
    return PathFamily(n, paths)


def certify_cusp(c: CuspedSpace, family: PathFamily | None = None, h=None) -> Certificate:
    """Slim-family certificate of hyperbolicity for the cusped space."""
    if family is None:
        family = cusp_path_family(c)
    return certify_guess_geodesics(c.graph, family, h)


# ---------------------------------------------------------------------------
# unwrap and glue


@dataclass
class UnwrappedSpace:
    """Z-cover truncation of the tube complement with a horoball over the unwrapped shell.

    Cover vertices keep their cover ids; horoball level ``n >= 1`` over lifted
    shell vertex ``i`` (index into ``shell_lift``) has id ``N + (n-1)*L + i``.
    ``q`` maps every vertex to the cusped space.
    """

    cusped: CuspedSpace
    cover: CoverTruncation
    shell_lift: list[int]
    shell_graph: Graph
    horoball: Horoball
    graph: Graph
    q: list[int]
    depth_max: int
    classification: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.cover.graph.n

    @property
    def L(self) -> int:
        return len(self.shell_lift)

    def depth(self, x: int) -> int:
        return 0 if x < self.N else (x - self.N) // self.L + 1

    def hvid(self, i: int, n: int) -> int:
        return self.shell_lift[i] if n == 0 else self.N + (n - 1) * self.L + i

    def in_horoball(self, x: int) -> bool:
        return x >= self.N or x in self._lift_index

    @cached_property
    def _lift_index(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.shell_lift)}

    def deck(self, x: int, power: int = 1) -> int | None:
        if x < self.N:
            return self.cover.deck(x, power)
        n, i = divmod(x - self.N, self.L)
        y = self.cover.deck(self.shell_lift[i], power)
        if y is None:
            return None
        return self.hvid(self._lift_index[y], n + 1)


def unwrap_and_glue(graph: Graph, W: Iterable[int], K: int, s: int, D: int, window: int,
                    depth_max: int, cusped: CuspedSpace | None = None) -> UnwrappedSpace:
    """Unwrap the tube complement along its Z-quotient and glue a horoball over the lifted shell."""
    W = frozenset(W)
    if cusped is None:
        cusped = cusp(graph, W, K, s, depth_max)
    ctc = cusped.ctc
    pres = pi1D_presentation(ctc.graph, D)
    verdict = classify_small(pres)
    if verdict.kind != "infinite-cyclic":
        raise GraphError(f"D-fundamental group of the tube complement is {verdict.kind}, not Z")
    hom = verdict.z_hom(pres.n_gens)
    cov = z_cover(ctc.graph, D, hom, window, pres=pres)
    cs_set = set(ctc.cs_ids)
    base_frontier = ctc.graph.frontier
    shell_lift = [x for x in range(cov.graph.n) if cov.projection[x] in cs_set]
    sg, _ = cov.graph.induced(shell_lift)
    sg = Graph(sg.n, sg.edges)
    if not sg.is_connected():
        raise GraphError("lifted shell is disconnected; increase D or the completion scale")
    sdist = sg.distance_matrix()
    h_edges = horoball_edges(sdist, depth_max)
    Ln, N = len(shell_lift), cov.graph.n

    def to_ug(x: int) -> int:
        n, i = divmod(x, Ln)
        return shell_lift[i] if n == 0 else N + (n - 1) * Ln + i

    edges = list(cov.graph.edges)
    edges.extend((to_ug(a), to_ug(b)) for a, b in h_edges if a >= Ln or b >= Ln)
    frontier = set(cov.graph.frontier)
    frontier.update(x for x in range(N) if cov.projection[x] in base_frontier)
    # horoball vertices whose horizontal neighbourhood reaches an incomplete shell vertex
    shell_front = [i for i, x in enumerate(shell_lift) if x in frontier]
    if shell_front:
        to_front = sdist[shell_front].min(axis=0)
        for n in range(1, depth_max + 1):
            for i in range(Ln):
                if to_front[i] <= 2 ** n:
                    frontier.add(N + (n - 1) * Ln + i)
    saturated = Ln <= 1 or int(sdist.max()) <= 2 ** depth_max
    if not saturated:
        frontier.update(range(N + (depth_max - 1) * Ln, N + depth_max * Ln) if depth_max else shell_lift)
    labels = {x: ("shell" if cov.projection[x] in cs_set else "complement") for x in range(N)}
    for n in range(1, depth_max + 1):
        for i in range(Ln):
            labels[N + (n - 1) * Ln + i] = f"horoball:{n}"
    g = Graph(N + depth_max * Ln, edges, labels, frontier)
    q = list(cov.projection)
    cs_local = cusped._cs_local
    for n in range(1, depth_max + 1):
        for i in range(Ln):
            q.append(cusped.vid(cs_local[cov.projection[shell_lift[i]]], n))
    h = Horoball(sg, depth_max, Graph(Ln * (depth_max + 1), h_edges), saturated, sdist)
    info = {"kind": verdict.kind, "generators": pres.n_gens, "relators": len(pres.relators),
            "hom_support": sum(1 for h in hom if h)}
    return UnwrappedSpace(cusped, cov, shell_lift, sg, h, g, q, depth_max, info)


def unwrap_audit(u: UnwrappedSpace) -> Report:
    """q is depth preserving, constant on deck orbits, and maps edges to edges or single vertices."""
    cg = u.cusped.graph
    for a, b in u.graph.edges:
        qa, qb = u.q[a], u.q[b]
        if qa != qb and not cg.has_edge(qa, qb):
            return Report("unwrap", "fail", {"reason": "q does not map an edge to an edge"},
                          witness=[a, b])
    for x in range(u.graph.n):
        if u.depth(x) != u.cusped.depth(u.q[x]):
            return Report("unwrap", "fail", {"reason": "q not depth preserving"}, witness=x)
        y = u.deck(x)
        if y is not None and u.q[y] != u.q[x]:
            return Report("unwrap", "fail", {"reason": "q o deck != q"}, witness=x)
    collapsed = sum(1 for a, b in u.graph.edges if u.q[a] == u.q[b])
    return Report("unwrap", "pass", {"vertices": u.graph.n, "edges": u.graph.num_edges,
                                     "collapsed_edges": collapsed,
                                     "classification": u.classification})


def shell_systole(u: UnwrappedSpace) -> int | str:
    """Least deck displacement of a middle-fiber lifted shell vertex, inside the lifted shell."""
    best = math.inf
    idx = u._lift_index
    for i, x in enumerate(u.shell_lift):
        if u.cover.fiber[x] != 0:
            continue
        y = u.cover.deck(x)
        if y is None or y not in idx:
            continue
        best = min(best, int(u.horoball.base_dist[i, idx[y]]))
    return "unmeasured" if best == math.inf else best


def ball_isometry_audit(u: UnwrappedSpace, sigma: Fraction | int, centers: Sequence[int] | None = None,
                        stride: int = 1) -> Report:
    """On ``B(z, 3 sigma)``: q injective, distance preserving, and onto the image ball.

    Centers default to every ``stride``-th vertex at depth at most ``3 sigma``.
    A center counts only when both balls sit far enough from the truncation
    that every distance compared is exact (frontier distance at least
    ``2r - 1``); others are reported as skipped.
    """
    r3 = 3 * Fraction(sigma)
    if r3.denominator != 1 or r3 < 1:
        raise GraphError("3*sigma must be a positive integer")
    r = int(r3)
    g, cg = u.graph, u.cusped.graph
    if centers is None:
        centers = [x for x in range(g.n) if u.depth(x) <= r][::stride]
    checked = skipped = 0
    for z in centers:
        # a detour through the frontier costs at least d(x,F) + d(F,y) + 2 >= 2r
        need = max(2 * r - 1, r)
        if _frontier_distance(g, z, need) < need or _frontier_distance(cg, u.q[z], need) < need:
            skipped += 1
            continue
        checked += 1
        ball = _bfs_limited(g, z, r)
        image: dict[int, int] = {}
        for x in ball:
            qx = u.q[x]
            if qx in image:
                y = image[qx]
                loop = g.geodesic(x, y)
                return Report("ball-isometry", "fail",
                              {"radius": r, "sigma": Fraction(sigma), "checked": checked,
                               "shell_systole": shell_systole(u)},
                              witness={"center": z, "collision": [y, x],
                                       "short_loop": loop, "loop_image": [u.q[v] for v in loop]})
            image[qx] = x
        target = _bfs_limited(cg, u.q[z], r)
        if set(target) != set(image):
            extra = sorted(set(target) - set(image))[:5]
            return Report("ball-isometry", "fail", {"radius": r, "checked": checked,
                                                    "reason": "image is not the full ball"},
                          witness={"center": z, "missing_in_image": extra})
        for x in ball:
            du = _bfs_limited(g, x, 2 * r)
            dc = _bfs_limited(cg, u.q[x], 2 * r)
            for y in ball:
                if du.get(y) != dc.get(u.q[y]):
                    # cusped geodesic back to the start closes an essential loop
                    there = [u.q[v] for v in g.geodesic(x, y)]
                    back = cg.geodesic(u.q[y], u.q[x])
                    return Report("ball-isometry", "fail",
                                  {"radius": r, "checked": checked, "reason": "distance changed",
                                   "shell_systole": shell_systole(u)},
                                  witness={"center": z, "pair": [x, y], "unwrapped": du.get(y),
                                           "cusped": dc.get(u.q[y]),
                                           "loop_image": there + back[1:]})
    details = {"radius": r, "sigma": Fraction(sigma), "checked": checked, "skipped": skipped,
               "shell_systole": shell_systole(u)}
    if checked == 0:
        return Report("ball-isometry", "inconclusive", {**details, "reason": "no certifiable center"})
    return Report("ball-isometry", "pass", details)


# ---------------------------------------------------------------------------
# local models


def _ball_signature(graph: Graph, center: int, r: int) -> tuple:
    d = _bfs_limited(graph, center, r)
    prof: dict[int, list[int]] = {}
    for v, k in d.items():
        deg = sum(1 for w in graph.adj[v] if w in d)
        prof.setdefault(k, []).append(deg)
    return tuple((k, tuple(sorted(prof[k]))) for k in sorted(prof))


@dataclass
class ModelSpace:
    """A named graph with the centers allowed to serve as model balls."""

    name: str
    graph: Graph
    centers: list[int]
    _index: dict = field(default_factory=dict, repr=False)

    def candidates(self, sig: tuple, r: int) -> list[int]:
        if r not in self._index:
            idx: dict[tuple, list[int]] = {}
            for c in self.centers:
                if _frontier_distance(self.graph, c, r) <= r:
                    continue
                idx.setdefault(_ball_signature(self.graph, c, r), []).append(c)
            self._index[r] = idx
        return self._index[r].get(sig, [])


def local_model_audit(u: UnwrappedSpace, radius: int, models: Sequence[ModelSpace],
                      centers: Sequence[int] | None = None, stride: int = 1) -> Report:
    """Each sampled ball of ``u`` is pointed-isomorphic to a ball in some model space."""
    g = u.graph
    if centers is None:
        centers = list(range(g.n))[::stride]
    matched: dict[str, int] = {m.name: 0 for m in models}
    skipped = 0
    for z in centers:
        if _frontier_distance(g, z, radius) <= radius:
            skipped += 1
            continue
        ball = ball_around(g, z, radius)
        sig = _ball_signature(g, z, radius)
        hit = None
        for m in models:
            for c in m.candidates(sig, radius):
                if pointed_isomorphic(ball, ball_around(m.graph, c, radius)) is not None:
                    hit = (m.name, c)
                    break
            if hit:
                break
        if hit is None:
            return Report("local-models", "fail", {"radius": radius, "matched": matched},
                          witness={"center": z, "depth": u.depth(z), "ball_size": ball.graph.n})
        matched[hit[0]] += 1
    details = {"radius": radius, "matched": matched, "skipped": skipped}
    if not sum(matched.values()):
        return Report("local-models", "inconclusive", details)
    return Report("local-models", "pass", details)


def default_models(u: UnwrappedSpace, ambient: Graph) -> list[ModelSpace]:
    """Open horoball over the lifted shell, the ambient space and the cusped space."""
    hb = u.horoball
    deep = [x for x in range(hb.graph.n) if hb.depth(x) >= 1]
    return [ModelSpace("horoball", Graph(hb.graph.n, hb.graph.edges,
                                         frontier=_horoball_frontier(u)), deep),
            ModelSpace("ambient", ambient, list(range(ambient.n))),
            ModelSpace("cusped", u.cusped.graph, list(range(u.cusped.graph.n)))]


def _horoball_frontier(u: UnwrappedSpace) -> list[int]:
    """Horoball vertices whose counterparts in the glued space are frontier, plus level 0."""
    out = []
    for x in range(u.horoball.graph.n):
        n, i = divmod(x, u.L)
        if n == 0 or u.hvid(i, n) in u.graph.frontier:
            out.append(x)
    return out


# ---------------------------------------------------------------------------
# separated families and hollowing out


@dataclass
class SeparatedFamily:
    """Tubes given by cores and radius, horoballs given by vertex sets, and a separation."""

    tubes: list[list[int]]
    radius: int
    horoballs: list[list[int]]
    chi: int
    reference: tuple[Graph, list[int]] | None = None
    reference_horoball: tuple[Graph, list[int]] | None = None

    def members(self, graph: Graph) -> list[tuple[str, set[int]]]:
        out = []
        for core in self.tubes:
            _, tube, _ = sphere_and_tube(graph, core, self.radius)
            out.append(("tube", set(tube) | set(core)))
        out.extend(("horoball", set(h)) for h in self.horoballs)
        return out


def separated_family_audit(graph: Graph, fam: SeparatedFamily) -> Report:
    """Member types, core comparability, horoball neighbourhoods and pairwise separation."""
    reports = []
    alpha = max(1, fam.chi // 10)
    # (1) tubes are copies of the reference tube
    if fam.reference is not None:
        rg, rcore = fam.reference
        _, rtube, _ = sphere_and_tube(rg, rcore, fam.radius)
        sub_r, keep_r = rg.induced(rtube)
        lr = {v: i for i, v in enumerate(keep_r)}
        ok = True
        for core in fam.tubes:
            _, tube, _ = sphere_and_tube(graph, core, fam.radius)
            sub, keep = graph.induced(tube)
            li = {v: i for i, v in enumerate(keep)}
            if set_preserving_isomorphism(sub, {li[v] for v in core}, sub_r, {lr[v] for v in rcore}) is None:
                ok = False
                reports.append(Report("clause-1", "fail", {"core": core[:5]}))
                break
        if ok:
            reports.append(Report("clause-1", "pass", {"tubes": len(fam.tubes)}))
        # (2) core comparability
        for core in fam.tubes:
            rep, _ = tube_comparable((graph, core), fam.reference, alpha)
            rep.name = "clause-2"
            reports.append(rep)
    else:
        reports.append(Report("clause-1", "inconclusive", {"reason": "no reference tube"}))
    # (3) horoball neighbourhoods
    if fam.horoballs:
        if fam.reference_horoball is None:
            reports.append(Report("clause-3", "inconclusive", {"reason": "no reference horoball"}))
        else:
            rg, rh = fam.reference_horoball
            _, _, nr = sphere_and_tube(rg, rh, alpha)
            sub_r, keep_r = rg.induced(nr)
            lr = {v: i for i, v in enumerate(keep_r)}
            for hset in fam.horoballs:
                _, _, nb = sphere_and_tube(graph, hset, alpha)
                sub, keep = graph.induced(nb)
                li = {v: i for i, v in enumerate(keep)}
                m = set_preserving_isomorphism(sub, {li[v] for v in hset}, sub_r, {lr[v] for v in rh})
                reports.append(Report("clause-3", "pass" if m is not None else "fail",
                                      {"alpha": alpha, "size": sub.n}))
    # (4) separation
    members = fam.members(graph)
    worst = math.inf
    pair = None
    for i in range(len(members)):
        d = graph.bfs(members[i][1])
        for j in range(i + 1, len(members)):
            dij = min(d[v] for v in members[j][1])
            if dij < worst:
                worst, pair = dij, (i, j)
    if len(members) < 2:
        reports.append(Report("clause-4", "pass", {"members": len(members)}))
    else:
        ok = worst >= fam.chi
        reports.append(Report("clause-4", "pass" if ok else "fail",
                              {"chi": fam.chi, "min_distance": worst},
                              witness=None if ok else {"members": pair}))
    out = combine("separated-family", reports)
    out.details["alpha"] = alpha
    return out


def hollow_out(graph: Graph, fam: SeparatedFamily, s: int) -> tuple[Graph, CompletedTubeComplement | None, list[int]]:
    """Remove the open horoballs, then take the completed tube complement of all cores.

    Returns the hollowed graph, the tube-complement record (None without
    tubes) and the kept original vertex ids of the horoball-stripped space.
    """
    removed = set().union(*[set(h) for h in fam.horoballs]) if fam.horoballs else set()
    keep = [v for v in range(graph.n) if v not in removed]
    stripped, keep = graph.induced(keep) if removed else (graph, list(range(graph.n)))
    if not fam.tubes:
        return stripped, None, keep
    local = {v: i for i, v in enumerate(keep)}
    cores = {local[v] for core in fam.tubes for v in core}
    ctc = completed_tube_complement(stripped, cores, fam.radius, s)
    return ctc.graph, ctc, keep


# ---------------------------------------------------------------------------
# iteration


@dataclass
class UnwrapStep:
    index: int
    space: UnwrappedSpace
    family: SeparatedFamily
    basepoint: int
    report: Report


def _lift_core(u: UnwrappedSpace, core: Sequence[int], fiber: int) -> list[int] | None:
    """Lift a core path of the underlying graph into the cover at the given fiber."""
    ctc = u.cusped.ctc
    path = [ctc.of_ambient.get(v) for v in core]
    if any(v is None for v in path):
        return None
    start = u.cover.vid(path[0], fiber)
    return u.cover.lift_walk(start, path) if start is not None else None


def iterate_unwrap(graph: Graph, family: SeparatedFamily, schedule: Sequence[int], steps: int,
                   window: int, s: int, D: int, depth_max: int, basepoint: int,
                   ball_radius: int = 4) -> tuple[list[UnwrapStep], Report]:
    """Unwrap the scheduled tube at each step, lifting the remaining tubes.

    Tube indices in the schedule refer to the tubes still present at that
    step.  Per step: the new family (lifted tubes in the middle fiber plus
    the new horoball) is audited for separation, lifted tubes are checked to
    be tubes, and the basepoint ball is compared with the previous step.
    """
    if steps > len(schedule):
        raise GraphError("schedule shorter than the number of steps")
    out: list[UnwrapStep] = []
    cur_graph, cur_fam, cur_base = graph, family, basepoint
    stab = []
    for i in range(steps):
        t = schedule[i]
        core = cur_fam.tubes[t]
        u = unwrap_and_glue(cur_graph, core, cur_fam.radius, s, D, window, depth_max)
        ctc = u.cusped.ctc
        base_ctc = ctc.of_ambient.get(cur_base)
        if base_ctc is None:
            raise GraphError(f"step {i}: basepoint lies inside the unwrapped tube")
        new_base = u.cover.vid(base_ctc, 0)
        tubes = []
        for j, other in enumerate(cur_fam.tubes):
            if j == t:
                continue
            lifted = _lift_core(u, other, 0)
            if lifted is None:
                raise GraphError(f"step {i}: tube {j} does not lift inside the window")
            tubes.append(lifted)
        new_h = [x for x in range(u.graph.n) if u.depth(x) >= 1]
        horoballs = [new_h]
        for hset in cur_fam.horoballs:
            lift = [u.cover.vid(ctc.of_ambient[v], 0) for v in hset if v in ctc.of_ambient]
            horoballs.append(lift)
        fam = SeparatedFamily(tubes, cur_fam.radius, horoballs, cur_fam.chi, cur_fam.reference,
                              cur_fam.reference_horoball)
        reps = [unwrap_audit(u)]
        # lifted tubes are tubes: neighbourhood isomorphic to the original tube
        k = 0
        for j, other in enumerate(cur_fam.tubes):
            if j == t:
                continue
            _, tube_a, _ = sphere_and_tube(cur_graph, other, cur_fam.radius)
            _, tube_b, _ = sphere_and_tube(u.graph, tubes[k], cur_fam.radius)
            sa, ka = cur_graph.induced(tube_a)
            sb, kb = u.graph.induced(tube_b)
            la = {v: x for x, v in enumerate(ka)}
            lb = {v: x for x, v in enumerate(kb)}
            m = set_preserving_isomorphism(sa, {la[v] for v in other}, sb, {lb[v] for v in tubes[k]})
            reps.append(Report("lifted-tube", "pass" if m is not None else "fail",
                               {"tube": j, "size": sa.n}))
            # separation from the new horoball never below the old tube distance
            d_old = min(cur_graph.bfs(core)[v] for v in other)
            d_new = min(u.graph.bfs(new_h)[v] for v in tubes[k]) if new_h else math.inf
            reps.append(Report("lifted-separation",
                               "pass" if d_new + cur_fam.radius >= d_old - cur_fam.radius else "fail",
                               {"tube": j, "old_core_distance": d_old, "new_horoball_distance": d_new}))
            k += 1
        prev_ball = ball_around(cur_graph, cur_base, ball_radius)
        new_ball = ball_around(u.graph, new_base, ball_radius)
        same = pointed_isomorphic(prev_ball, new_ball) is not None
        dist_to_shell = min(u.graph.bfs([new_base])[x] for x in u.shell_lift)
        stab.append({"step": i, "ball_radius": ball_radius, "stable": same,
                     "basepoint_to_new_shell": dist_to_shell})
        rep = combine(f"unwrap-step-{i}", reps)
        if not rep.passed:
            raise GraphError(f"step {i} audit failed: {rep.to_dict()}")
        out.append(UnwrapStep(i, u, fam, new_base, rep))
        cur_graph, cur_fam, cur_base = u.graph, fam, new_base
    ok = all(e["stable"] for e in stab if e["basepoint_to_new_shell"] > 2 * ball_radius)
    summary = Report("iterate-unwrap", "pass" if ok else "fail",
                     {"steps": steps, "stabilization": stab})
    return out, summary


# ---------------------------------------------------------------------------
# very translating condition


def very_translating_check(u: UnwrappedSpace, theta: Fraction | int, powers: Sequence[int] = (1, -1, 2, -2),
                           points: Sequence[int] | None = None, factor: int = 10 ** 4) -> Report:
    """``d(x, n.x) >= factor * theta`` for sampled deck powers and points outside the horoball.

    Truncated distances only bound true distances from above, so each
    distance is certified: exact when no detour through the frontier could
    be shorter, otherwise only the frontier lower bound is used.
    """
    threshold = factor * Fraction(theta)
    g = u.graph
    if points is None:
        points = [x for x in range(u.N) if not u.in_horoball(x) and u.cover.fiber[x] == 0]
    powers = [p for p in powers if p != 0]
    front = sorted(g.frontier)
    dF = g.bfs(front) if front else [math.inf] * g.n
    worst = None
    shortest = None
    inconclusive = 0
    checked = 0
    for x in points:
        dx = None
        for p in powers:
            y = u.deck(x, p)
            if y is None:
                continue
            if dx is None:
                dx = g.bfs([x])
            checked += 1
            d_tr = dx[y]
            lower = min(d_tr, dF[x] + dF[y] + 2)
            if shortest is None or d_tr < shortest["distance"]:
                shortest = {"point": x, "power": p, "distance": d_tr}
            if lower < threshold:
                inconclusive += 1
            if worst is None or lower < worst["lower_bound"]:
                worst = {"point": x, "power": p, "lower_bound": lower, "truncated": d_tr}
    details = {"threshold": threshold, "theta": Fraction(theta), "checked": checked,
               "uncertified": inconclusive, "minimum": worst}
    if shortest is not None and shortest["distance"] < threshold:
        # truncated distances are upper bounds, so a short one is a genuine failure
        return Report("very-translating", "fail", details, witness=shortest)
    if checked == 0:
        return Report("very-translating", "inconclusive", {**details, "reason": "no deck pair in window"})
    if inconclusive:
        return Report("very-translating", "inconclusive", details)
    return Report("very-translating", "pass", details)
