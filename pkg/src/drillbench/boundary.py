"""Visual metrics on finite boundary samples, linear connectedness and spherical connectivity.

Boundary points are represented by far-sphere vertices at an explicit
horizon; Gromov products are the finite products at the basepoint.  All
exponentials and logarithms go through interval arithmetic so that a
verdict is only emitted when the comparison is decided.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from mpmath import iv, mp

from .graph import Graph, GraphError
from .report import Report

iv.dps = 40

DELTA_FLOOR = Fraction(1, 2)


def _ivq(x: Fraction | int) -> iv.mpf:
    x = Fraction(x)
    return iv.mpf(x.numerator) / x.denominator


def _pair(x: iv.mpf) -> list[str]:
    """Lower and upper endpoints as decimal strings."""
    with mp.workdps(iv.dps):
        return [mp.nstr(mp.mpf(x.a), 20), mp.nstr(mp.mpf(x.b), 20)]


def kappa() -> iv.mpf:
    """``(3 - 2 e^{1/3})^{-1}``, as an interval."""
    return 1 / (3 - 2 * iv.exp(iv.mpf(1) / 3))


def adapted_params(delta: Fraction | int) -> tuple[Fraction, iv.mpf]:
    """``epsilon = 1/(6 delta)`` and the fixed multiplicative constant ``kappa``."""
    delta = Fraction(delta)
    if delta <= 0:
        raise GraphError("delta must be positive for an adapted visual metric")
    return 1 / (6 * delta), kappa()


def adapted_delta(measured: Fraction | int, floor: Fraction = DELTA_FLOOR) -> tuple[Fraction, bool]:
    """Measured delta raised to a positive floor; the flag records whether the floor applied."""
    measured = Fraction(measured)
    return (floor, True) if measured < floor else (measured, False)


@dataclass
class BoundarySample:
    """Far points seen from ``basepoint``; ``gromov2`` holds doubled Gromov products."""

    basepoint: int | str
    points: list
    gromov2: np.ndarray = field(repr=False)
    delta: Fraction
    horizon: int
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        g = self.gromov2
        if g.shape != (len(self.points), len(self.points)) or not np.array_equal(g, g.T):
            raise GraphError("Gromov matrix must be square and symmetric")

    @property
    def epsilon(self) -> Fraction:
        return adapted_params(self.delta)[0]

    def product(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.gromov2[i, j]), 2)

    def to_dict(self) -> dict:
        return {"basepoint": self.basepoint, "points": list(self.points),
                "gromov_matrix": [[Fraction(int(v), 2) for v in row] for row in self.gromov2],
                "delta": self.delta, "horizon": self.horizon, "notes": self.notes}


def _gromov2(dist_w: np.ndarray, dist_pts: np.ndarray) -> np.ndarray:
    dw = dist_w.astype(np.int64)
    return dw[:, None] + dw[None, :] - dist_pts.astype(np.int64)


def sphere_sample(graph: Graph, w: int, R: int, delta: Fraction | int,
                  size: int | None = None, seed: int = 0) -> BoundarySample:
    """Sphere of radius ``R`` about ``w`` (optionally a seeded subsample) in a finite graph."""
    dw = np.array(graph.bfs([w]))
    pts = np.nonzero(dw == R)[0]
    if len(pts) == 0:
        raise GraphError(f"sphere of radius {R} is empty")
    if size is not None and size < len(pts):
        pts = np.sort(np.random.default_rng(seed).choice(pts, size, replace=False))
    pts = pts.tolist()
    rows = graph.distance_rows(pts)[:, pts]
    notes = []
    frontier = set(graph.frontier)
    if frontier and min(dw[v] for v in frontier) <= R + 1:
        notes.append("sphere lies within one step of the truncation; products may be overestimated")
    return BoundarySample(w, pts, _gromov2(dw[pts], rows), Fraction(delta), R, notes)


def tree_sphere_sample(gen, R: int, size: int, seed: int = 0,
                       delta: Fraction | int = DELTA_FLOOR) -> BoundarySample:
    """Seeded sample of reduced words of length ``R`` in a tree generator (closed-form distances)."""
    rng = np.random.default_rng(seed)
    letters = list(gen.alphabet)
    inv = gen.inverse
    pts: list[str] = []
    seen = set()
    total = len(letters) * (len(letters) - 1) ** (R - 1) if R else 1
    while len(pts) < min(size, total):
        w = ""
        for _ in range(R):
            choices = [c for c in letters if not w or c != inv[w[-1]]]
            w += choices[int(rng.integers(len(choices)))]
        if w not in seen:
            seen.add(w)
            pts.append(w)
    pts.sort()
    n = len(pts)
    dist = np.array([[gen.distance(a, b) for b in pts] for a in pts])
    dw = np.full(n, R)
    return BoundarySample(gen.origin, pts, _gromov2(dw, dist), Fraction(delta), R,
                          ["products computed from closed-form tree distances"])


def visual_distance(sample: BoundarySample, i: int, j: int) -> tuple[iv.mpf, iv.mpf, iv.mpf]:
    """Representative ``exp(-eps (i|j))`` and its bracket ``[value/kappa, kappa*value]``."""
    if i == j:
        raise GraphError("visual distance needs two distinct sample points")
    eps, k = adapted_params(sample.delta)
    val = iv.exp(-_ivq(eps) * _ivq(sample.product(i, j)))
    return val, val / k, val * k


def product_consistency(sample: BoundarySample) -> Report:
    """Check ``(i|k) >= min((i|j), (j|k)) - delta`` over all triples of the sample."""
    g = sample.gromov2
    two_delta = 2 * sample.delta
    worst = Fraction(0)
    witness = None
    n = len(sample.points)
    for j in range(n):
        m = np.minimum(g[:, j][:, None], g[j, :][None, :])
        defect = m - g
        i, k = np.unravel_index(int(np.argmax(defect)), defect.shape)
        d = Fraction(int(defect[i, k]), 2)
        if d > worst:
            worst, witness = d, {"i": int(i), "j": j, "k": int(k)}
    ok = 2 * worst <= two_delta
    return Report("gromov-product-consistency", "pass" if ok else "fail",
                  {"max_defect": worst, "delta": sample.delta}, witness=witness)


# ---------------------------------------------------------------------------
# linear connectedness


@dataclass
class ChainVerdict:
    """Least integer L admitting fine chains for every tested pair, or none up to ``L_max``."""

    L: int | None
    L_max: int
    pairs_tested: int
    pairs_skipped: int
    failures: list[dict]
    witnesses: list[dict]
    numerically_inconclusive: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def conclusion_threshold(self) -> int | None:
        return None if self.L is None else 5 * self.L

    @property
    def status(self) -> str:
        if self.L is not None:
            return "finite"
        return "none" if self.failures or self.witnesses else "unresolved"

    @property
    def summary(self) -> str:
        if self.status == "unresolved":
            return "no pair resolvable at this horizon"
        return f"L = {self.L}" if self.L is not None else f"none <= {self.L_max}"

    def to_dict(self) -> dict:
        return {"L": self.L, "L_max": self.L_max, "status": self.status, "summary": self.summary,
                "conclusion_threshold": self.conclusion_threshold,
                "pairs_tested": self.pairs_tested, "pairs_skipped": self.pairs_skipped,
                "numerically_inconclusive": self.numerically_inconclusive,
                "failures": self.failures[:20], "witnesses": self.witnesses[:20],
                "notes": self.notes}


def _maximin(allowed: np.ndarray, weight: np.ndarray, src: int) -> np.ndarray:
    """For every vertex the best achievable minimum weight along a path from ``src``."""
    n = len(weight)
    best = np.full(n, -np.inf)
    best[src] = weight[src]
    done = np.zeros(n, dtype=bool)
    for _ in range(n):
        cand = np.where(done, -np.inf, best)
        u = int(np.argmax(cand))
        if cand[u] == -np.inf:
            break
        done[u] = True
        nb = allowed[u] & ~done
        best[nb] = np.maximum(best[nb], np.minimum(cand[u], weight[nb]))
    return best


def linear_connectedness_estimate(sample: BoundarySample, L_max: int = 50,
                                  sources: int | None = None, seed: int = 0,
                                  resolution: Fraction | int = Fraction(3, 2)) -> ChainVerdict:
    """Fine-chain search with representative visual distances.

    A step ``x -> y`` is fine for the pair ``(p, q)`` when
    ``rho(x, y) <= rho(p, q)/2``, i.e. ``(x|y) >= (p|q) + 6 delta ln 2``.  For
    each pair the chain minimizing the largest distance from ``p`` is found
    by a maximin search; its points lie in the ball of radius ``r*`` about
    ``p``, so the chain has diameter at most ``2 r*`` and ``L_pq = 2 r*/rho(p,q)``.
    ``sources`` restricts the first point ``p`` to a seeded subset.  A pair
    is only tested when every step with product at least
    ``horizon - resolution`` counts as fine; finer pairs are skipped as
    unresolved because the sample cannot link them.
    """
    n = len(sample.points)
    if n < 2:
        raise GraphError("need at least two sample points")
    eps = _ivq(sample.epsilon)
    step_gap = 6 * _ivq(sample.delta) * iv.ln(2)
    g2 = sample.gromov2
    src = list(range(n))
    if sources is not None and sources < n:
        src = sorted(np.random.default_rng(seed).choice(n, sources, replace=False).tolist())
    top2 = 2 * sample.horizon - 2 * Fraction(resolution)
    L_needed = 1
    failures: list[dict] = []
    witnesses: list[dict] = []
    skipped = tested = inconclusive = 0
    allowed_cache: dict[int, np.ndarray] = {}
    for p in src:
        for t2 in sorted({int(v) for v in g2[p]}):
            qs = [q for q in range(n) if q != p and g2[p, q] == t2]
            if not qs:
                continue
            if t2 not in allowed_cache:
                # decide (x|y) - t >= step_gap for every integer value of 2(x|y)
                lo = iv.mpf(t2) / 2 + step_gap
                need2 = math.floor(2 * lo.a) + 1  # least doubled product strictly above the gap
                if not (iv.mpf(need2) / 2 > lo):
                    inconclusive += 1
                if need2 > top2:
                    allowed_cache[t2] = None
                else:
                    allowed = g2 >= need2
                    np.fill_diagonal(allowed, False)
                    allowed_cache[t2] = allowed
            allowed = allowed_cache[t2]
            if allowed is None:
                skipped += len(qs)
                continue
            best = _maximin(allowed, g2[p].astype(float), p)
            for q in qs:
                tested += 1
                if best[q] == -np.inf:
                    failures.append({"p": sample.points[p], "q": sample.points[q],
                                     "product": Fraction(t2, 2)})
                    continue
                gap = Fraction(t2 - int(best[q]), 2)  # (p|q) - min product along chain >= 0
                Lpq = 2 * iv.exp(eps * _ivq(gap))
                need = math.ceil(Lpq.b)
                if math.ceil(Lpq.a) != need:
                    inconclusive += 1
                if need > L_needed:
                    L_needed = need
                    witnesses.append({"p": sample.points[p], "q": sample.points[q],
                                      "product": Fraction(t2, 2), "L_pair": need})
    notes = [f"pairs needing steps finer than horizon - {Fraction(resolution)} were skipped as unresolved"]
    if not tested:
        return ChainVerdict(None, L_max, 0, skipped, [], [], inconclusive, notes)
    if failures or L_needed > L_max:
        return ChainVerdict(None, L_max, tested, skipped, failures, witnesses, inconclusive, notes)
    return ChainVerdict(L_needed, L_max, tested, skipped, failures, witnesses, inconclusive, notes)


# ---------------------------------------------------------------------------
# spherical connectivity


def spherical_connectivity_check(graph: Graph, y: int, R: int, Delta: Fraction | int,
                                 delta: Fraction | int, pairs: Sequence[tuple[int, int]] | None = None,
                                 max_failures: int = 10) -> Report:
    """Constrained search on the sphere of radius ``R`` about ``y``.

    Consecutive points need ``(p_i|p_{i+1})_y >= R - 5 delta``; every point
    needs ``(p|p_i)_y >= (p|q)_y - Delta``.
    """
    dy = np.array(graph.bfs([y]))
    sphere = np.nonzero(dy == R)[0].tolist()
    if not sphere:
        return Report("spherical-connectivity", "inconclusive", {"reason": "empty sphere", "R": R})
    rows = graph.distance_rows(sphere)[:, sphere]
    g2 = _gromov2(dy[sphere], rows)
    step2 = 2 * R - 10 * Fraction(delta)
    adj = g2 >= step2
    np.fill_diagonal(adj, False)
    index = {v: i for i, v in enumerate(sphere)}
    if pairs is None:
        pairs = [(a, b) for a in range(len(sphere)) for b in range(a + 1, len(sphere))]
    else:
        pairs = [(index[a], index[b]) for a, b in pairs]
    D2 = 2 * Fraction(Delta)
    fails = []
    checked = 0
    for a, b in pairs:
        checked += 1
        if a == b:
            continue
        ok = g2[a] >= g2[a, b] - D2
        seen = {a}
        queue = deque([a])
        while queue and b not in seen:
            u = queue.popleft()
            for v in np.nonzero(adj[u] & ok)[0].tolist():
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        if b not in seen:
            fails.append({"p": sphere[a], "q": sphere[b], "product": Fraction(int(g2[a, b]), 2)})
            if len(fails) >= max_failures:
                break
    details = {"R": R, "Delta": Fraction(Delta), "delta": Fraction(delta), "sphere_size": len(sphere),
               "pairs_checked": checked}
    if fails:
        return Report("spherical-connectivity", "fail", details, witness=fails)
    return Report("spherical-connectivity", "pass", details)


# ---------------------------------------------------------------------------
# rebasing and constants


def rebase(graph: Graph, w: int, x: int, y: int) -> tuple[int, bool]:
    """Point at distance ``(x|y)_w`` from ``w`` on the least geodesic toward ``x``.

    Returns the point and whether the product was an integer (otherwise the
    floor is used).
    """
    dw = graph.bfs([w])
    dx = graph.bfs([x])
    if dw[x] == math.inf or dw[y] == math.inf:
        raise GraphError("points not reachable from the basepoint")
    prod2 = int(dw[x] + dw[y] - dx[y])
    path = graph.geodesic(w, x, dx)
    k = prod2 // 2
    if k >= len(path):
        raise GraphError("truncation too small for the requested rebasing")
    return path[k], prod2 % 2 == 0


def section6_constants(delta0: Fraction | int, L0: Fraction | int, kappa_value=None,
                       epsilon: Fraction | int | None = None) -> dict:
    """Interval values of ``Delta_0``, ``C_0`` and the chain constant ``Delta``."""
    d0 = _ivq(delta0)
    L = _ivq(L0)
    if kappa_value is None:
        kappa_value = kappa()
    k = kappa_value if isinstance(kappa_value, iv.mpf) else _ivq(kappa_value)
    if epsilon is None:
        epsilon = adapted_params(delta0)[0]
    e = _ivq(epsilon)
    if not (d0 > 0 and L > 0 and k > 0 and e > 0):
        raise GraphError("section constants need positive inputs")
    Delta0 = iv.ln(2 * k ** 2 * L) / e + 20 * d0
    C0 = 2 * ((2 * iv.ln(k) + iv.ln(L)) / e + 29 * d0) + 20 * d0
    Delta = iv.ln(k ** 2 * L) / e + 5 * d0
    return {"Delta0": Delta0, "C0": C0, "Delta": Delta}


def intervals_to_json(values: dict) -> dict:
    return {k: _pair(v) if isinstance(v, iv.mpf) else v for k, v in values.items()}
