"""Model spaces: regular trees, the square grid, surface groups and {p,q} tilings.

A :class:`SpaceGenerator` is a lazy neighbour rule with canonical vertex
names.  Balls are materialized by BFS from a centre, visiting neighbours in
the generator's fixed order, so local ids never depend on what was generated
earlier.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .graph import Graph, GraphError, PointedBall
from .report import Report


class UnsupportedSpaceError(GraphError):
    """The requested space or presentation class is not supported."""


class WordError(GraphError):
    """A word cannot be realized as a reduced path in the generator."""


class SpaceGenerator:
    """Base class: subclasses define ``origin`` and ``neighbors``."""

    kind: str = "abstract"

    @property
    def origin(self) -> Hashable:
        raise NotImplementedError

    def neighbors(self, name: Hashable) -> list:
        raise NotImplementedError

    def describe(self) -> str:
        return self.kind

    def step(self, name: Hashable, letter: str) -> Hashable:
        """Follow a labelled edge; only Cayley-type generators support this."""
        raise WordError(f"{self.kind} has no edge labels")


def generate_ball(gen: SpaceGenerator, center: Hashable | None, R: int) -> PointedBall:
    """Induced ball of radius ``R`` around ``center`` (default: the origin)."""
    if R < 0:
        raise GraphError("radius must be non-negative")
    if center is None:
        center = gen.origin
    index = {center: 0}
    order = [center]
    depth = [0]
    queue = deque([center])
    while queue:
        v = queue.popleft()
        dv = depth[index[v]]
        if dv == R:
            continue
        for w in gen.neighbors(v):
            if w not in index:
                index[w] = len(order)
                order.append(w)
                depth.append(dv + 1)
                queue.append(w)
    edges = []
    frontier = []
    for v in order:
        i = index[v]
        missing = False
        for w in gen.neighbors(v):
            j = index.get(w)
            if j is None:
                missing = True
            elif i < j:
                edges.append((i, j))
        if missing:
            frontier.append(i)
    return PointedBall(Graph(len(order), edges, frontier=frontier), 0, R, tuple(order))


# ---------------------------------------------------------------------------
# free groups / regular trees


class TreeGenerator(SpaceGenerator):
    """Regular tree of the given valence as a Cayley graph.

    Even valence ``2r`` is the free group on ``r`` letters (lowercase letters,
    uppercase inverses).  Odd valence ``k`` is the free product of ``k``
    copies of Z/2, each lowercase letter being its own inverse.
    """

    def __init__(self, valence: int) -> None:
        if valence < 2:
            raise UnsupportedSpaceError("tree valence must be at least 2")
        self.valence = valence
        self.kind = f"tree:{valence}"
        letters = "abcdefghijklmnopqrstuvwxyz"
        if valence % 2 == 0:
            gens = letters[: valence // 2]
            self.alphabet = [c for g in gens for c in (g, g.upper())]
            self.inverse = {c: c.swapcase() for c in self.alphabet}
        else:
            if valence > 26:
                raise UnsupportedSpaceError("odd valence above 26 not supported")
            self.alphabet = list(letters[:valence])
            self.inverse = {c: c for c in self.alphabet}

    @property
    def origin(self) -> str:
        return ""

    def step(self, name: str, letter: str) -> str:
        if letter not in self.inverse:
            raise WordError(f"letter {letter!r} not in alphabet of {self.kind}")
        if name and name[-1] == self.inverse[letter]:
            return name[:-1]
        return name + letter

    def neighbors(self, name: str) -> list[str]:
        return [self.step(name, c) for c in self.alphabet]

    def distance(self, x: str, y: str) -> int:
        k = 0
        while k < min(len(x), len(y)) and x[k] == y[k]:
            k += 1
        return len(x) + len(y) - 2 * k


# ---------------------------------------------------------------------------
# Z^2


class GridGenerator(SpaceGenerator):
    """The square grid as the Cayley graph of Z^2 with letters a, b."""

    kind = "grid"
    alphabet = ["a", "A", "b", "B"]
    _moves = {"a": (1, 0), "A": (-1, 0), "b": (0, 1), "B": (0, -1)}

    @property
    def origin(self) -> tuple[int, int]:
        return (0, 0)

    def step(self, name: tuple[int, int], letter: str) -> tuple[int, int]:
        if letter not in self._moves:
            raise WordError(f"letter {letter!r} not in alphabet of grid")
        dx, dy = self._moves[letter]
        return (name[0] + dx, name[1] + dy)

    def neighbors(self, name: tuple[int, int]) -> list[tuple[int, int]]:
        return [self.step(name, c) for c in self.alphabet]

    def distance(self, x: tuple[int, int], y: tuple[int, int]) -> int:
        return abs(x[0] - y[0]) + abs(x[1] - y[1])


# ---------------------------------------------------------------------------
# layered stores shared by surface groups and tilings


class _LayeredStore(SpaceGenerator):
    """Vertices discovered by BFS from the origin, named by discovery order.

    The store only ever grows whole layers, so a vertex's name depends on
    the space alone.
    """

    def __init__(self) -> None:
        self.layer: list[int] = []
        self.nbrs: list[list[int] | None] = []
        self.grown = -1  # every vertex of layer <= grown has known neighbours

    @property
    def origin(self) -> int:
        return 0

    def _expand(self, v: int) -> list[int]:
        raise NotImplementedError

    def grow_to(self, radius: int) -> None:
        while self.grown < radius:
            r = self.grown + 1
            for v in [u for u in range(len(self.layer)) if self.layer[u] == r]:
                self.nbrs[v] = self._expand(v)
            self.grown = r

    def neighbors(self, name: int) -> list[int]:
        if not 0 <= name < len(self.layer):
            self.grow_to(self.grown + 1)
            if not 0 <= name < len(self.layer):
                raise GraphError(f"vertex {name} not generated")
        self.grow_to(self.layer[name])
        return list(self.nbrs[name])


class SurfaceGroupGenerator(_LayeredStore):
    """Cayley graph of the closed orientable surface group of genus ``g >= 2``.

    Equality of group elements is decided by Dehn's algorithm for the
    standard one-relator presentation; names are BFS discovery indices, which
    coincide with the shortlex order of shortlex-least representative words.
    """

    def __init__(self, genus: int) -> None:
        if genus < 2:
            raise UnsupportedSpaceError("surface groups need genus >= 2")
        super().__init__()
        self.genus = genus
        self.kind = f"surface:{genus}"
        letters = "abcdefghijklmnopqrstuvwxyz"[: 2 * genus]
        self.alphabet = [c for g in letters for c in (g, g.upper())]
        rel = "".join(letters[2 * i] + letters[2 * i + 1] + letters[2 * i].upper()
                      + letters[2 * i + 1].upper() for i in range(genus))
        self.relator = rel
        self._cyclic = set()
        for w in (rel, _inv(rel)):
            for i in range(len(w)):
                self._cyclic.add(w[i:] + w[:i])
        self.words: list[str] = [""]
        self.layer = [0]
        self.nbrs = [None]
        self._bucket: dict[tuple, list[int]] = {self._abel(""): [0]}

    def _abel(self, w: str) -> tuple[int, ...]:
        out = [0] * (2 * self.genus)
        for c in w:
            k = "abcdefghijklmnopqrstuvwxyz".index(c.lower())
            out[k] += 1 if c.islower() else -1
        return tuple(out)

    def dehn_reduce(self, w: str) -> str:
        """Free reduction plus Dehn's algorithm until neither applies."""
        n = len(self.relator)
        half = n // 2
        changed = True
        while changed:
            w = _free_reduce(w)
            changed = False
            for length in range(n, half, -1):
                for i in range(len(w) - length + 1):
                    piece = w[i:i + length]
                    for r in self._cyclic:
                        if r.startswith(piece):
                            w = w[:i] + _inv(r[length:]) + w[i + length:]
                            changed = True
                            break
                    if changed:
                        break
                if changed:
                    break
        return w

    def equal(self, u: str, v: str) -> bool:
        return self.dehn_reduce(u + _inv(v)) == ""

    def _expand(self, v: int) -> list[int]:
        out = []
        base = self.words[v]
        r = self.layer[v]
        for c in self.alphabet:
            cand = base + c
            key = self._abel(cand)
            found = None
            for u in self._bucket.get(key, []):
                if abs(self.layer[u] - r) <= 1 and self.equal(self.words[u], cand):
                    found = u
                    break
            if found is None:
                found = len(self.words)
                self.words.append(cand)
                self.layer.append(r + 1)
                self.nbrs.append(None)
                self._bucket.setdefault(key, []).append(found)
            out.append(found)
        return out

    def step(self, name: int, letter: str) -> int:
        if letter not in self.alphabet:
            raise WordError(f"letter {letter!r} not in alphabet of {self.kind}")
        return self.neighbors(name)[self.alphabet.index(letter)]


def _inv(w: str) -> str:
    return w[::-1].swapcase()


def _free_reduce(w: str) -> str:
    out: list[str] = []
    for c in w:
        if out and out[-1] == c.swapcase() and c != c.swapcase():
            out.pop()
        else:
            out.append(c)
    return "".join(out)


# ---------------------------------------------------------------------------
# {p,q} tilings


def _rot(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _boost(e: float) -> np.ndarray:
    c, s = math.cosh(e), math.sinh(e)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]])


class TilingGenerator(_LayeredStore):
    """1-skeleton of the regular hyperbolic tiling {p,q}.

    Vertices are placed on the hyperboloid; each carries a frame whose
    direction 0 points at the vertex it was discovered from.  Neighbours are
    listed counter-clockwise starting from direction 0, which gives a rotation
    system used to walk turn-words.
    """

    def __init__(self, p: int, q: int) -> None:
        if (p - 2) * (q - 2) <= 4:
            raise UnsupportedSpaceError(f"{{{p},{q}}} is not a hyperbolic tiling")
        super().__init__()
        self.p, self.q = p, q
        self.kind = f"tiling:{p},{q}"
        edge = 2 * math.acosh(math.cos(math.pi / p) / math.sin(math.pi / q))
        self._steps = [_rot(2 * math.pi * j / q) @ _boost(edge) for j in range(q)]
        self._flip = _rot(math.pi)
        self.frames: list[np.ndarray] = [np.eye(3)]
        self.layer = [0]
        self.nbrs = [None]
        self._cells: dict[tuple[int, int], list[int]] = {(0, 0): [0]}

    def _pos(self, frame: np.ndarray) -> np.ndarray:
        return frame[:, 2]

    def _lookup(self, x: np.ndarray) -> int | None:
        cx, cy = round(x[0] * 4), round(x[1] * 4)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for v in self._cells.get((cx + dx, cy + dy), ()):
                    if np.abs(self._pos(self.frames[v]) - x).max() < 0.05:
                        return v
        return None

    def _expand(self, v: int) -> list[int]:
        out = []
        frame = self.frames[v]
        for j in range(self.q):
            f = frame @ self._steps[j]
            x = self._pos(f)
            w = self._lookup(x)
            if w is None:
                w = len(self.frames)
                self.frames.append(f @ self._flip)
                self.layer.append(self.layer[v] + 1)
                self.nbrs.append(None)
                self._cells.setdefault((round(x[0] * 4), round(x[1] * 4)), []).append(w)
            out.append(w)
        return out

    def disk_point(self, v: int) -> tuple[float, float]:
        """Poincare-disk coordinates of ``v``."""
        x, y, t = self._pos(self.frames[v])
        return float(x / (1 + t)), float(y / (1 + t))

    def rotation(self, v: int) -> list[int]:
        """Neighbours of ``v`` in counter-clockwise order."""
        return self.neighbors(v)

    def turn(self, prev: int, cur: int, offset: int) -> int:
        """Vertex after ``cur`` when turning ``offset`` slots ccw from ``prev``."""
        rot = self.rotation(cur)
        return rot[(rot.index(prev) + offset) % self.q]


# ---------------------------------------------------------------------------
# construction from a space string


def make_generator(spec: str) -> SpaceGenerator:
    """Parse ``tiling:7,3``, ``tree:4``, ``grid`` or ``surface:2``."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "tiling":
            p, q = (int(x) for x in arg.split(","))
            return TilingGenerator(p, q)
        if kind == "tree":
            return TreeGenerator(int(arg))
        if kind == "grid" and not arg:
            return GridGenerator()
        if kind == "surface":
            return SurfaceGroupGenerator(int(arg))
    except ValueError as exc:
        raise UnsupportedSpaceError(f"cannot parse space spec {spec!r}: {exc}") from None
    raise UnsupportedSpaceError(
        f"unsupported space {spec!r}; supported: tiling:p,q, tree:k, grid, surface:g"
    )


# ---------------------------------------------------------------------------
# axes


_TURN_LETTERS = {"R": 1, "L": -1}


@dataclass
class Axis:
    """Truncation of a periodic bi-infinite edge path.

    ``names`` lists generator names of the path vertices with index ``i``
    stored at ``names[i + window]``.  The measured quasi-convexity and
    quasi-geodesic constants are filled in by :func:`axis_in`.
    """

    word: str
    window: int
    names: list
    base: Hashable
    period: int
    lam0: int | None = None
    qi_additive: int | None = None
    qi_multiplicative: float | None = None
    notes: list[str] = field(default_factory=list)

    def vertex_ids(self, ball: PointedBall) -> list[int]:
        index = {nm: i for i, nm in enumerate(ball.names)}
        try:
            return [index[nm] for nm in self.names]
        except KeyError as exc:
            raise GraphError(f"axis vertex {exc.args[0]!r} outside the ball") from None

    def segment(self, half: int) -> list:
        """Names of the sub-window ``-half..half``."""
        if half > self.window:
            raise GraphError("sub-window exceeds the axis window")
        return self.names[self.window - half: self.window + half + 1]


def _cayley_path(gen: SpaceGenerator, base, word: str, window: int) -> list:
    inv = getattr(gen, "inverse", None)
    if inv is None:
        inv = {c: c.swapcase() for c in getattr(gen, "alphabet", [])}
    for c in word:
        if c not in inv:
            raise WordError(f"letter {c!r} not in alphabet of {gen.kind}")
    cyc = word + word
    for i in range(len(word)):
        if cyc[i + 1] == inv[cyc[i]]:
            raise WordError(f"word {word!r} is not cyclically reduced")
    fwd, cur = [base], base
    for i in range(window):
        cur = gen.step(cur, word[i % len(word)])
        fwd.append(cur)
    back, cur = [], base
    for i in range(window):
        cur = gen.step(cur, inv[word[-1 - (i % len(word))]])
        back.append(cur)
    return back[::-1] + fwd


def _tiling_path(gen: TilingGenerator, base: int, word: str, window: int,
                 direction: int = 0) -> list[int]:
    offsets = []
    for c in word:
        if c in _TURN_LETTERS:
            offsets.append(_TURN_LETTERS[c] % gen.q)
        elif c.isdigit():
            offsets.append(int(c))
        else:
            raise WordError(f"turn letter {c!r} not understood (use L, R or digits)")
        if offsets[-1] % gen.q == 0:
            raise WordError("turn offset 0 backtracks")
    first = gen.rotation(base)[direction]
    fwd = [base, first]
    for i in range(window - 1):
        fwd.append(gen.turn(fwd[-2], fwd[-1], offsets[i % len(offsets)]))
    # walk backwards: the turn taken at v_k is offsets[k-1 mod period]
    back: list[int] = []
    nxt, cur = first, base
    for i in range(window):
        off = offsets[(-1 - i) % len(offsets)]
        prev = gen.turn(nxt, cur, -off)
        back.append(prev)
        nxt, cur = cur, prev
    return back[::-1] + fwd[: window + 1]


def axis_in(
    gen: SpaceGenerator,
    word: str,
    window: int,
    base: Hashable | None = None,
    direction: int = 0,
    measure: bool = True,
    margin: int = 3,
) -> Axis:
    """Periodic path with ``window`` steps either side of ``base``.

    For Cayley generators the word is read in the group's letters; for
    tilings it is a periodic sequence of turns (``R`` = one slot
    counter-clockwise from the incoming edge, ``L`` = one slot clockwise,
    digits = explicit offsets).
    """
    if window < 1:
        raise GraphError("window must be at least 1")
    if not word:
        raise WordError("empty word")
    if base is None:
        base = gen.origin
    if isinstance(gen, TilingGenerator):
        names = _tiling_path(gen, base, word, window, direction)
    else:
        names = _cayley_path(gen, base, word, window)
    if len(set(names)) != len(names):
        raise WordError(f"word {word!r} does not trace an embedded path")
    axis = Axis(word, window, names, base, len(word))
    if measure:
        measure_axis(gen, axis, margin)
    return axis


def measure_axis(gen: SpaceGenerator, axis: Axis, margin: int = 3) -> None:
    """Fill in lam0 (geodesic deviation) and quasi-geodesic constants."""
    if hasattr(gen, "distance"):
        _measure_axis_closed_form(gen, axis)
        return
    radius = axis.window + margin
    ball = generate_ball(gen, axis.base, radius)
    g = ball.graph
    ids = axis.vertex_ids(ball)
    rows = g.distance_rows(ids)
    to_axis = rows.min(axis=0)
    lam = 0
    add = 0
    mult = 1.0
    touched_frontier = False
    frontier = np.zeros(g.n, dtype=bool)
    frontier[list(g.frontier)] = True
    k = len(ids)
    for i in range(k):
        for j in range(i + 1, k):
            dij = rows[i, ids[j]]
            add = max(add, int((j - i) - dij))
            mult = max(mult, (j - i) / dij)
            on_geo = rows[i] + rows[j] == dij
            lam = max(lam, int(to_axis[on_geo].max()))
            if frontier[on_geo].any():
                touched_frontier = True
    axis.lam0 = lam
    axis.qi_additive = add
    axis.qi_multiplicative = mult
    if touched_frontier:
        axis.notes.append(
            f"a geodesic between axis points reached the truncation radius {radius}; "
            "lam0 is a lower bound"
        )


def geodesic_interval(gen: SpaceGenerator, a, b) -> set:
    """All vertices on some geodesic from ``a`` to ``b`` (closed-form metrics)."""
    dab = gen.distance(a, b)
    layer = {a}
    out = {a}
    for k in range(dab):
        nxt = set()
        for v in layer:
            for w in gen.neighbors(v):
                if gen.distance(w, b) == dab - k - 1:
                    nxt.add(w)
        out |= nxt
        layer = nxt
    return out


def _measure_axis_closed_form(gen: SpaceGenerator, axis: Axis) -> None:
    names = axis.names
    lam = add = 0
    mult = 1.0
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            dij = gen.distance(names[i], names[j])
            add = max(add, (j - i) - dij)
            mult = max(mult, (j - i) / dij)
            for v in geodesic_interval(gen, names[i], names[j]):
                lam = max(lam, min(gen.distance(v, x) for x in names))
    axis.lam0, axis.qi_additive, axis.qi_multiplicative = lam, add, mult


@dataclass
class TranslateFamily:
    """Several axis truncations inside one finite graph."""

    graph: Graph
    members: list[list[int]]

    def pairwise(self) -> tuple[np.ndarray, dict[tuple[int, int], tuple[int, int]]]:
        k = len(self.members)
        mat = np.zeros((k, k), dtype=float)
        witness: dict[tuple[int, int], tuple[int, int]] = {}
        for i in range(k):
            d = self.graph.bfs(self.members[i])
            for j in range(k):
                if i == j:
                    continue
                best = min(self.members[j], key=lambda v: (d[v], v))
                mat[i, j] = d[best]
                if i < j:
                    src = self.graph.bfs([best])
                    witness[(i, j)] = (min(self.members[i], key=lambda v: (src[v], v)), best)
        return mat, witness


def separation_audit(family: TranslateFamily, sigma: int) -> Report:
    """Pass iff every two members are at least ``sigma`` apart."""
    if len(family.members) < 2:
        raise GraphError("separation audit needs at least two members")
    mat, witness = family.pairwise()
    k = len(family.members)
    pairs = [(mat[i, j], i, j) for i in range(k) for j in range(i + 1, k)]
    dmin, i, j = min(pairs)
    ok = dmin >= sigma
    return Report(
        "separation",
        "pass" if ok else "fail",
        {"sigma": sigma, "min_distance": _num(dmin), "pair": [i, j],
         "matrix": [[_num(x) for x in row] for row in mat]},
        witness={"members": [i, j], "vertices": list(witness[(i, j)])},
    )


def _num(x: float) -> int | str:
    return "inf" if x == math.inf else int(x)
