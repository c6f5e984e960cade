"""Gromov products, four-point delta, visibility and path-family certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .graph import DisconnectedError, Graph, GraphError
from .report import Report


def gromov_product(graph: Graph, x: int, y: int, w: int) -> Fraction:
    """``(x|y)_w`` as an exact half-integer."""
    dw = graph.bfs([w])
    dx = graph.bfs([x])
    if math.inf in (dw[x], dw[y], dx[y]):
        raise DisconnectedError("points lie in different components")
    return Fraction(int(dw[x]) + int(dw[y]) - int(dx[y]), 2)


def gromov_matrix(dist: np.ndarray, points: Sequence[int], w: int) -> np.ndarray:
    """Matrix of doubled Gromov products ``2 (p_i|p_j)_w`` (integers)."""
    pts = np.asarray(points)
    dw = dist[w, pts].astype(np.int64)
    return dw[:, None] + dw[None, :] - dist[np.ix_(pts, pts)].astype(np.int64)


# ---------------------------------------------------------------------------
# four-point delta


@dataclass
class DeltaEstimate:
    delta: Fraction
    method: str
    samples: int
    witness: tuple[int, ...] | None
    lower_bound: bool = False

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "method": self.method,
            "samples": self.samples,
            "witness": list(self.witness) if self.witness else None,
            "lower_bound": self.lower_bound,
        }


def quadruple_defect(dist: np.ndarray, quad: Sequence[int]) -> Fraction:
    """Four-point defect of one quadruple: (largest - middle pair sum) / 2."""
    x, y, z, w = quad
    sums = sorted([dist[x, y] + dist[z, w], dist[x, z] + dist[y, w], dist[x, w] + dist[y, z]])
    return Fraction(int(sums[2] - sums[1]), 2)


def four_point_delta(
    graph: Graph,
    policy: str | tuple = "exact",
    vertices: Sequence[int] | None = None,
    dist: np.ndarray | None = None,
) -> DeltaEstimate:
    """Maximal four-point defect.

    ``policy`` is ``"exact"`` or ``("sample", n, seed)``.  ``vertices``
    restricts the quadruples to a subset while keeping the metric of the
    whole graph.
    """
    if dist is None:
        dist = graph.distance_matrix()
    pts = np.arange(graph.n) if vertices is None else np.asarray(sorted(set(vertices)))
    if isinstance(policy, str) and policy.startswith("sample:"):
        _, n, seed = policy.split(":")
        policy = ("sample", int(n), int(seed))
    if policy == "exact":
        return _exact_delta(dist, pts)
    if isinstance(policy, tuple) and policy[0] == "sample":
        _, n, seed = policy
        if seed is None:
            raise GraphError("sampled delta needs an explicit seed")
        return _sampled_delta(dist, pts, int(n), int(seed))
    raise GraphError(f"unknown delta policy {policy!r}")


def _exact_delta(dist: np.ndarray, pts: np.ndarray) -> DeltaEstimate:
    k = len(pts)
    sub = dist[np.ix_(pts, pts)].astype(np.int64)
    best = -1
    witness = None
    for a in range(k - 3):
        for b in range(a + 1, k - 2):
            rest = np.arange(b + 1, k)
            m = len(rest)
            dc = sub[np.ix_(rest, rest)]
            s1 = sub[a, b] + dc
            s2 = sub[a, rest][:, None] + sub[b, rest][None, :]
            s3 = sub[a, rest][None, :] + sub[b, rest][:, None]
            hi = np.maximum(np.maximum(s1, s2), s3)
            lo = np.minimum(np.minimum(s1, s2), s3)
            mid = s1 + s2 + s3 - hi - lo
            defect = hi - mid
            mask = np.triu(np.ones((m, m), dtype=bool), 1)
            defect = np.where(mask, defect, -1)
            flat = int(np.argmax(defect))
            val = int(defect.flat[flat])
            if val > best:
                best = val
                i, j = divmod(flat, m)
                witness = (int(pts[a]), int(pts[b]), int(pts[rest[i]]), int(pts[rest[j]]))
    if witness is None:
        return DeltaEstimate(Fraction(0), "exact-4pt", 0, None)
    n_quads = math.comb(k, 4)
    return DeltaEstimate(Fraction(best, 2), "exact-4pt", n_quads, witness)


def _sampled_delta(dist: np.ndarray, pts: np.ndarray, n: int, seed: int) -> DeltaEstimate:
    rng = np.random.default_rng(seed)
    k = len(pts)
    if k < 4:
        return DeltaEstimate(Fraction(0), "sampled-4pt", 0, None, lower_bound=True)
    best, witness = -1, None
    chunk = 4096
    done = 0
    while done < n:
        c = min(chunk, n - done)
        q = np.sort(np.stack([rng.choice(k, 4, replace=False) for _ in range(c)]), axis=1)
        x, y, z, w = (pts[q[:, i]] for i in range(4))
        s1 = dist[x, y] + dist[z, w]
        s2 = dist[x, z] + dist[y, w]
        s3 = dist[x, w] + dist[y, z]
        s = np.sort(np.stack([s1, s2, s3], axis=1), axis=1)
        defect = s[:, 2] - s[:, 1]
        i = int(np.argmax(defect))
        if defect[i] > best:
            best = int(defect[i])
            witness = (int(x[i]), int(y[i]), int(z[i]), int(w[i]))
        done += c
    return DeltaEstimate(Fraction(best, 2), "sampled-4pt", n, witness, lower_bound=True)


# ---------------------------------------------------------------------------
# visibility


def geodesic_extension(graph: Graph, p: int, dist_p: Sequence[float] | None = None) -> list[float]:
    """For each ``u``, the largest ``d(p, q')`` over geodesics from ``p`` through ``u``."""
    if dist_p is None:
        dist_p = graph.bfs([p])
    order = sorted((v for v in range(graph.n) if dist_p[v] != math.inf),
                   key=lambda v: -dist_p[v])
    ext = list(dist_p)
    for u in order:
        du = dist_p[u]
        for w in graph.adj[u]:
            if dist_p[w] == du + 1 and ext[w] > ext[u]:
                ext[u] = ext[w]
    return ext


def visibility_check(graph: Graph, nu: Fraction | int, interior: Iterable[int]) -> Report:
    """Every interior pair within ``100 nu`` sees a long geodesic near ``q``.

    For interior ``p, q`` with ``d(p,q) <= 100 nu`` some geodesic from ``p``
    of length at least ``200 nu`` must pass within ``nu`` of ``q``.
    """
    nu = Fraction(nu)
    inner = sorted(set(interior))
    if not inner:
        return Report("visibility", "inconclusive", {"nu": nu, "reason": "empty interior"})
    worst = None
    checked = 0
    for p in inner:
        dp = graph.bfs([p])
        ext = geodesic_extension(graph, p, dp)
        for q in inner:
            if dp[q] > 100 * nu:
                continue
            checked += 1
            dq = graph.bfs([q]) if nu >= 1 else None
            if dq is None:
                reach = ext[q]
            else:
                reach = max(ext[u] for u in range(graph.n) if dq[u] <= nu)
            if reach < 200 * nu:
                gap = 200 * nu - reach
                if worst is None or gap > worst[0]:
                    worst = (gap, p, q, reach)
    details = {"nu": nu, "pairs_checked": checked, "required_length": 200 * nu,
               "interior_size": len(inner)}
    if worst is None:
        return Report("visibility", "pass", details, assumptions=[
            "interior lies at least 300*nu from the truncation boundary (caller-declared)"])
    _, p, q, reach = worst
    details["longest_extension"] = reach
    return Report("visibility", "fail", details, witness={"p": p, "q": q})


# ---------------------------------------------------------------------------
# guessing geodesics


class PathFamily:
    """Connected vertex sets ``Path(x, y)`` for every pair, stored symmetrically."""

    def __init__(self, n: int, paths: Mapping[tuple[int, int], Sequence[int]]) -> None:
        self.n = n
        self._paths: dict[tuple[int, int], tuple[int, ...]] = {}
        for (x, y), p in paths.items():
            key = (x, y) if x <= y else (y, x)
            self._paths[key] = tuple(p)

    def get(self, x: int, y: int) -> tuple[int, ...]:
        if x == y:
            return self._paths.get((x, x), (x,))
        return self._paths[(x, y) if x < y else (y, x)]

    def items(self):
        return self._paths.items()

    def validate(self, graph: Graph) -> None:
        for x in range(self.n):
            for y in range(x + 1, self.n):
                if (x, y) not in self._paths:
                    raise GraphError(f"path family missing pair ({x},{y})")
        for (x, y), p in self._paths.items():
            s = set(p)
            if x not in s or y not in s:
                raise GraphError(f"Path({x},{y}) misses an endpoint")
            sub, _ = graph.induced(s)
            if not sub.is_connected():
                raise GraphError(f"Path({x},{y}) is not connected")

    def to_dict(self) -> dict:
        return {"n": self.n, "paths": [[x, y, list(p)] for (x, y), p in sorted(self._paths.items())]}

    @classmethod
    def from_dict(cls, data: Mapping) -> PathFamily:
        return cls(int(data["n"]), {(x, y): p for x, y, p in data["paths"]})


def lex_geodesic(dist: np.ndarray, graph: Graph, x: int, y: int) -> list[int]:
    path = [x]
    cur = x
    while cur != y:
        target = dist[cur, y] - 1
        cur = next(w for w in graph.adj[cur] if dist[w, y] == target)
        path.append(cur)
    return path


def geodesic_family(graph: Graph) -> PathFamily:
    """Lexicographically least geodesics for every pair."""
    dist = graph.distance_matrix()
    return PathFamily(graph.n, {(x, y): lex_geodesic(dist, graph, x, y)
                                for x in range(graph.n) for y in range(x + 1, graph.n)})


def _bound_holds(m: int, h: Fraction) -> bool:
    """Exact test of ``2h(6 + log2(m+2)) <= m``."""
    if h == 0:
        return True
    a, b = h.numerator, h.denominator
    e = m * b - 12 * a
    if e < 0:
        return False
    return (m + 2) ** (2 * a) <= 2 ** e


def m_min(h: Fraction | int) -> int:
    """Least positive integer ``m`` with ``2h(6 + log2(m+2)) <= m`` (``1`` when h = 0)."""
    h = Fraction(h)
    if h < 0:
        raise GraphError("h must be non-negative")
    m = max(1, math.ceil(12 * h))
    while not _bound_holds(m, h):
        m += 1
    return m


@dataclass
class Certificate:
    h: Fraction
    m: int | None
    k: Fraction | None
    passed: bool
    log: dict = field(default_factory=dict)
    witness: dict | None = None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"h": self.h, "m": self.m, "k": self.k, "passed": self.passed,
                "log": self.log, "witness": self.witness, "flags": self.flags}

    def report(self) -> Report:
        return Report("guessing-geodesics", "pass" if self.passed else "fail",
                      {"h": self.h, "m": self.m, "k": self.k, **self.log, "flags": self.flags},
                      witness=self.witness)


def path_family_defects(graph: Graph, family: PathFamily, dist: np.ndarray | None = None) -> dict:
    """Measure the slim-triple defect and the short-pair diameter of a family."""
    if dist is None:
        dist = graph.distance_matrix()
    n = graph.n
    dtype = np.uint8 if dist.max() < 255 else np.uint16
    dtp = np.zeros((n, n, n), dtype=dtype)
    for x in range(n):
        dtp[x, x] = dist[x]
        for y in range(x + 1, n):
            row = dist[list(family.get(x, y))].min(axis=0)
            dtp[x, y] = row
            dtp[y, x] = row
    best = -1
    triple = None
    for x in range(n):
        for y in range(x + 1, n):
            p = list(family.get(x, y))
            a = dtp[x][:, p]
            b = dtp[y][:, p]
            worst_z = np.minimum(a, b).max(axis=1)
            z = int(np.argmax(worst_z))
            val = int(worst_z[z])
            if val > best:
                best = val
                triple = (x, y, z)
    diam = 0
    pair = None
    for x in range(n):
        for y in graph.adj[x]:
            if y <= x:
                continue
            p = list(family.get(x, y))
            dd = int(dist[np.ix_(p, p)].max())
            if dd > diam:
                diam, pair = dd, (x, y)
    return {"max_triple_defect": max(best, 0), "triple": triple,
            "max_short_pair_diameter": diam, "pair": pair}


def certify_guess_geodesics(
    graph: Graph, family: PathFamily, h: Fraction | int | None = None,
    dist: np.ndarray | None = None,
) -> Certificate:
    """Check both slim-family conditions at ``h`` and derive ``(m, k)``.

    With ``h=None`` the smallest integer ``h`` satisfying both conditions is
    measured and used.
    """
    family.validate(graph)
    if dist is None:
        dist = graph.distance_matrix()
    meas = path_family_defects(graph, family, dist)
    log = {"condition1_max_defect": meas["max_triple_defect"],
           "condition2_max_diameter": meas["max_short_pair_diameter"]}
    if h is None:
        h = max(meas["max_triple_defect"], meas["max_short_pair_diameter"])
        log["h_measured"] = True
    h = Fraction(h)
    witness = None
    if meas["max_triple_defect"] > h:
        x, y, z = meas["triple"]
        witness = {"condition": 1, "x": x, "y": y, "z": z}
    elif meas["max_short_pair_diameter"] > h:
        x, y = meas["pair"]
        witness = {"condition": 2, "x": x, "y": y}
    if witness is not None:
        return Certificate(h, None, None, False, log, witness)
    flags = []
    m = m_min(h)
    if h == 0:
        flags.append("h = 0: bound vacuous, m = 1 by convention")
    k = Fraction(3 * m, 2) - 5 * h
    assert _bound_holds(m, h) and k >= Fraction(3 * m, 2) - 5 * h
    log["hausdorff_to_geodesics"] = hausdorff_to_geodesics(graph, family, dist)
    log["moreover_bound"] = m - 4 * h
    return Certificate(h, m, k, True, log, None, flags)


def hausdorff_to_geodesics(graph: Graph, family: PathFamily, dist: np.ndarray) -> int:
    """Largest Hausdorff distance between ``Path(x,y)`` and the lex-least geodesic.

    A diagnostic only: it is reported, never asserted.
    """
    worst = 0
    for (x, y), p in family.items():
        if x == y:
            continue
        g = lex_geodesic(dist, graph, x, y)
        sub = dist[np.ix_(list(p), g)]
        worst = max(worst, int(sub.min(axis=1).max()), int(sub.min(axis=0).max()))
    return worst


# ---------------------------------------------------------------------------
# coarse Cartan-Hadamard arithmetic


def cch_verdict(nu: Fraction | int, sigma: Fraction | int, scale: Fraction | int,
                cch_factor: int = 10 ** 7, scale_factor: Fraction = Fraction(1, 10 ** 5)) -> Report:
    """Arithmetic side of the local-to-global hyperbolicity theorem."""
    nu, sigma, scale = Fraction(nu), Fraction(sigma), Fraction(scale)
    if nu < 0:
        raise GraphError("nu must be non-negative")
    ok_sigma = sigma >= cch_factor * nu
    ok_scale = scale <= scale_factor * sigma
    details = {"nu": nu, "sigma": sigma, "scale": scale,
               "sigma_condition": ok_sigma, "scale_condition": ok_scale}
    assumptions = [f"every ball of radius sigma={sigma} is nu-hyperbolic",
                   f"the space is {scale}-simply connected"]
    if ok_sigma and ok_scale:
        details["hyperbolicity_bound"] = 300 * nu
        return Report("coarse-cartan-hadamard", "pass", details, assumptions=assumptions)
    return Report("coarse-cartan-hadamard", "fail", details, assumptions=assumptions)
