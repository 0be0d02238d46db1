"""Exact rational convex polygons in the plane.

Vertices are stored as :class:`fractions.Fraction` pairs so that hull and
containment decisions never depend on rounding. Metric quantities
(distances, support values) are returned as floats; the exact support value
is available through ``support(..., exact=True)``.

Degenerate polygons (a single point, a segment) are valid everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

Number = int | float | Fraction


def _frac(value: Number | str) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite coordinate {value!r}")
    return Fraction(value)


@dataclass(frozen=True, order=True)
class RationalVec2:
    x: Fraction
    y: Fraction

    def __post_init__(self):
        object.__setattr__(self, "x", _frac(self.x))
        object.__setattr__(self, "y", _frac(self.y))

    @classmethod
    def of(cls, v: "RationalVec2 | Sequence[Number | str]") -> "RationalVec2":
        if isinstance(v, RationalVec2):
            return v
        x, y = v
        return cls(_frac(x), _frac(y))

    def __add__(self, other: "RationalVec2") -> "RationalVec2":
        return RationalVec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "RationalVec2") -> "RationalVec2":
        return RationalVec2(self.x - other.x, self.y - other.y)

    def __neg__(self) -> "RationalVec2":
        return RationalVec2(-self.x, -self.y)

    def __mul__(self, c: Number) -> "RationalVec2":
        c = _frac(c)
        return RationalVec2(self.x * c, self.y * c)

    __rmul__ = __mul__

    def __truediv__(self, c: Number) -> "RationalVec2":
        c = _frac(c)
        return RationalVec2(self.x / c, self.y / c)

    def dot(self, other: "RationalVec2") -> Fraction:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "RationalVec2") -> Fraction:
        return self.x * other.y - self.y * other.x

    @property
    def denominator(self) -> int:
        """Common reduced denominator q of (p1/q, p2/q)."""
        return math.lcm(self.x.denominator, self.y.denominator)

    def as_float(self) -> tuple[float, float]:
        return (float(self.x), float(self.y))

    def to_json(self) -> dict:
        return {"x": _fmt(self.x), "y": _fmt(self.y)}

    @classmethod
    def from_json(cls, d) -> "RationalVec2":
        """Accepts ``{"x": "p/q", "y": "p/q"}`` or a two-element list."""
        if isinstance(d, dict):
            return cls(Fraction(d["x"]), Fraction(d["y"]))
        x, y = d
        return cls(Fraction(x), Fraction(y))

    def __str__(self) -> str:
        return f"({self.x}, {self.y})"


def _fmt(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _cross3(o: RationalVec2, a: RationalVec2, b: RationalVec2) -> Fraction:
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)


def primitive_integer_direction(v: RationalVec2) -> tuple[int, int]:
    """Smallest integer vector with the same direction as ``v``."""
    if v.x == 0 and v.y == 0:
        raise ValueError("zero direction")
    den = math.lcm(v.x.denominator, v.y.denominator)
    a, b = int(v.x * den), int(v.y * den)
    g = math.gcd(a, b)
    return a // g, b // g


@dataclass(frozen=True)
class ConvexRationalPolygon:
    """Convex polygon with exact vertices in counterclockwise order.

    One vertex is a point, two vertices a segment. The vertex list is
    strictly convex: no repeats and no vertex in the hull of the others.
    """

    vertices: tuple[RationalVec2, ...]

    def __post_init__(self):
        verts = tuple(RationalVec2.of(v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if not verts:
            raise ValueError("empty point set")
        if len(set(verts)) != len(verts):
            raise ValueError("repeated vertex")
        if len(verts) >= 3:
            k = len(verts)
            for i in range(k):
                if _cross3(verts[i], verts[(i + 1) % k], verts[(i + 2) % k]) <= 0:
                    raise ValueError("vertex list is not strictly convex and counterclockwise")

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def dimension(self) -> int:
        return min(len(self.vertices) - 1, 2)

    def float_vertices(self) -> np.ndarray:
        return np.array([v.as_float() for v in self.vertices], dtype=float).reshape(-1, 2)

    def edges(self) -> list[tuple[RationalVec2, RationalVec2]]:
        vs = self.vertices
        if len(vs) == 1:
            return []
        if len(vs) == 2:
            return [(vs[0], vs[1]), (vs[1], vs[0])]
        return [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

    def area(self) -> Fraction:
        vs = self.vertices
        if len(vs) < 3:
            return Fraction(0)
        return sum((vs[i].cross(vs[(i + 1) % len(vs)]) for i in range(len(vs))), Fraction(0)) / 2

    @property
    def max_denominator(self) -> int:
        return max(v.denominator for v in self.vertices)

    def translate(self, t: RationalVec2 | Sequence[Number]) -> "ConvexRationalPolygon":
        t = RationalVec2.of(t)
        return ConvexRationalPolygon(tuple(v + t for v in self.vertices))

    def scale(self, c: Number) -> "ConvexRationalPolygon":
        c = _frac(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return ConvexRationalPolygon(tuple(v * c for v in self.vertices))

    def contains(self, p: RationalVec2 | Sequence[Number]) -> bool:
        """Exact closed containment."""
        p = RationalVec2.of(p)
        vs = self.vertices
        if len(vs) == 1:
            return p == vs[0]
        if len(vs) == 2:
            a, b = vs
            if _cross3(a, b, p) != 0:
                return False
            return (p - a).dot(b - a) >= 0 and (p - b).dot(a - b) >= 0
        return all(_cross3(a, b, p) >= 0 for a, b in self.edges())

    def contains_polygon(self, other: "ConvexRationalPolygon") -> bool:
        return all(self.contains(v) for v in other.vertices)

    def diameter(self) -> float:
        fv = self.float_vertices()
        diff = fv[:, None, :] - fv[None, :, :]
        return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))

    def to_json(self) -> dict:
        return {
            "vertices": [v.to_json() for v in self.vertices],
            "float_vertices": [list(v.as_float()) for v in self.vertices],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ConvexRationalPolygon":
        return cls(tuple(RationalVec2.from_json(v) for v in d["vertices"]))

    def __str__(self) -> str:
        return "[" + ", ".join(str(v) for v in self.vertices) + "]"


def convex_hull(points: Iterable[RationalVec2 | Sequence[Number]]) -> ConvexRationalPolygon:
    """Exact convex hull by Andrew's monotone chain.

    Collinear boundary points are dropped, so the result is strictly convex.
    """
    pts = sorted(set(RationalVec2.of(p) for p in points))
    if not pts:
        raise ValueError("empty point set")
    if len(pts) <= 2:
        return ConvexRationalPolygon(tuple(pts))

    def chain(seq):
        out: list[RationalVec2] = []
        for p in seq:
            while len(out) >= 2 and _cross3(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 or (len(hull) >= 3 and all(
            _cross3(hull[0], hull[1], h) == 0 for h in hull[2:])):
        return ConvexRationalPolygon((pts[0], pts[-1]))
    return ConvexRationalPolygon(tuple(hull))


def support(P: ConvexRationalPolygon, theta: Sequence[Number], exact: bool = False):
    """Support value max <v, theta> over P and the full set of maximisers.

    ``theta`` need not be normalised; the value scales with it. Ties return
    every maximising vertex (a whole edge when theta is an edge normal).
    """
    t = RationalVec2.of(theta)
    if t.x == 0 and t.y == 0:
        raise ValueError("zero direction")
    vals = [v.dot(t) for v in P.vertices]
    best = max(vals)
    argmax = tuple(v for v, val in zip(P.vertices, vals) if val == best)
    return (best if exact else float(best)), argmax


def _segment_distance(X: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    L2 = np.sum(ab * ab, axis=-1)
    ax = X - a
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0, np.sum(ax * ab, axis=-1) / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    d = ax - t[..., None] * ab
    return np.hypot(d[..., 0], d[..., 1])


def dist_to_scaled_polygon(X: np.ndarray, n, P: ConvexRationalPolygon) -> np.ndarray:
    """Vectorised Euclidean distance from each row of ``X`` to ``n * P``.

    ``n`` is a positive scalar or an array broadcasting against ``X[:, 0]``.
    """
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = X.reshape(-1, 2)
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0):
        raise ValueError("scale n must be positive")
    n = np.broadcast_to(n, X.shape[:1])[:, None]
    d = scaled_vertex_distance(X, n, P.float_vertices())
    return float(d[0]) if single else d


def scaled_vertex_distance(X: np.ndarray, n: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Distance from rows of X to n * hull(V), V counterclockwise; n of shape (m, 1)."""
    k = len(V)
    if k == 1:
        d = np.hypot(*(X - n * V[0]).T)
    else:
        d = np.full(len(X), np.inf)
        m = 1 if k == 2 else k
        for i in range(m):
            a, b = n * V[i], n * V[(i + 1) % k]
            d = np.minimum(d, _segment_distance(X, a, b))
        if k >= 3:
            inside = np.ones(len(X), dtype=bool)
            for i in range(k):
                a, b = n * V[i], n * V[(i + 1) % k]
                e, r = b - a, X - a
                inside &= e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0] >= 0
            d = np.where(inside, 0.0, d)
    return d


def dist_point_scaled_polygon(v: Sequence[float], n: int, P: ConvexRationalPolygon) -> float:
    """Euclidean distance from ``v`` to the dilation ``n * P``."""
    if n < 1 or int(n) != n:
        raise ValueError("n must be a positive integer")
    return float(dist_to_scaled_polygon(np.asarray(v, dtype=float), n, P))


def hausdorff(P: ConvexRationalPolygon, Q: ConvexRationalPolygon) -> float:
    """Symmetric Hausdorff distance between two convex polygons.

    For convex sets the distance to the other set is a convex function, so
    its maximum over a polygon is attained at a vertex.
    """
    if P == Q:
        return 0.0
    d1 = np.max(dist_to_scaled_polygon(P.float_vertices(), 1.0, Q))
    d2 = np.max(dist_to_scaled_polygon(Q.float_vertices(), 1.0, P))
    return float(max(d1, d2))


def excess(P: ConvexRationalPolygon, Q: ConvexRationalPolygon) -> float:
    """One-sided Hausdorff excess sup_{p in P} d(p, Q)."""
    return float(np.max(dist_to_scaled_polygon(P.float_vertices(), 1.0, Q)))


def max_vertex_denominator(delta: float) -> int:
    """Largest reduced denominator an extremal point of a delta-upper-stable
    rotation set can have: floor(4 / (pi delta^2)).

    When 4/(pi delta^2) is an integer up to rounding (1e-9 relative), that
    integer is returned. A result of 0 means the bound is degenerate: no
    rational extremal point is excluded.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    value = 4.0 / (math.pi * delta * delta)
    m = round(value)
    if m > 0 and abs(value - m) <= 1e-9 * m:
        return int(m)
    return int(math.floor(value))


def rational_polygon_from_floats(points: np.ndarray) -> ConvexRationalPolygon:
    """Hull of float points, each converted exactly to a dyadic rational."""
    pts = [RationalVec2(Fraction(float(x)), Fraction(float(y))) for x, y in np.asarray(points).reshape(-1, 2)]
    return convex_hull(pts)


def lcm_denominators(vs: Iterable[RationalVec2]) -> int:
    return reduce(math.lcm, (v.denominator for v in vs), 1)
