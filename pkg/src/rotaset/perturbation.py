"""C0 perturbations that relocate finitely many points, and destabilization.

A relocation moves the image f(x) of a point x to a prescribed target at
distance D < eps. It is realised by the time-one flow of the vector field

    X(p) = D * alpha(t) * gamma(s) * u

in coordinates s (along the unit vector u from f(x) to the target) and t
(across it). gamma is 1 on [0, D] and ramps linearly to 0 over a length r
at both ends; alpha is 1 for |t| <= r/2 and ramps to 0 at |t| = r. Flow
lines are straight, the speed never exceeds D, so the flow moves every
point by at most D and carries f(x) exactly onto the target. The support is
the rectangle [-r, D + r] x [-r, r], inside the r*sqrt(2)-neighbourhood of
the segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import config
from .estimation import find_periodic_orbit, orbit_hull_estimate
from .geometry import (ConvexRationalPolygon, RationalVec2, dist_point_scaled_polygon,
                       hausdorff, excess, max_vertex_denominator)
from .torus_maps import LiftMap, _grid
from .transition_graph import build_graph, outer_slack, pseudo_rotation_set

_SHIFTS = np.array([[i, j] for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)


def pigeonhole_radius(q: int) -> float:
    """Any q points of the torus contain a pair closer than this."""
    return 2.0 / math.sqrt(math.pi * q)


# ---------------------------------------------------------------------------
# close pairs


def _torus_gaps(D: np.ndarray) -> np.ndarray:
    D = D - np.round(D)
    return config.vector_norm(D)


def find_close_pairs(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Closest pair of every point set in a (B, q, 2) batch.

    Returns index arrays i < j and the toroidal distances. Ties go to the
    lexicographically first pair.
    """
    X = np.asarray(batch, dtype=float)
    if X.ndim != 3 or X.shape[2] != 2:
        raise ValueError("expected an array of shape (B, q, 2)")
    B, q, _ = X.shape
    if q < 2:
        raise ValueError("need at least two points")
    iu, ju = np.triu_indices(q, 1)
    d = _torus_gaps(X[:, ju, :] - X[:, iu, :])
    k = np.argmin(d, axis=1)
    return iu[k], ju[k], d[np.arange(B), k]


def find_close_pair(points: Sequence[Sequence[float]]) -> tuple[int, int, float]:
    P = np.asarray(points, dtype=float).reshape(1, -1, 2)
    if P.shape[1] < 2:
        raise ValueError("need at least two points")
    i, j, d = find_close_pairs(P)
    return int(i[0]), int(j[0]), float(d[0])


# ---------------------------------------------------------------------------
# split vectors


def split_vectors(q: int, v, k: int, u0: Sequence[int]) -> tuple[RationalVec2, RationalVec2]:
    """v0 = u0 / k and v1 = (q v - u0) / (q - k); v is their weighted mean."""
    if not 1 <= k <= q - 1:
        raise ValueError("k must satisfy 1 <= k <= q - 1")
    v = RationalVec2.of(v)
    px, py = v.x * q, v.y * q
    if px.denominator != 1 or py.denominator != 1:
        raise ValueError("q v must be an integer vector")
    px, py = px.numerator, py.numerator
    ux, uy = int(u0[0]), int(u0[1])
    # v0 == v iff u0 = k v; v1 == v iff the same, so one integer test covers both
    if ux * q == px * k and uy * q == py * k:
        raise ValueError("coprimality violated: v is not of reduced denominator q")
    return (RationalVec2(Fraction(ux, k), Fraction(uy, k)),
            RationalVec2(Fraction(px - ux, q - k), Fraction(py - uy, q - k)))


# ---------------------------------------------------------------------------
# bump flows


def _ramp_flow(s0: np.ndarray, c: np.ndarray, D: float, r: float) -> np.ndarray:
    """Time-one position of ds/dtau = c * gamma(s), started inside the support."""
    s = s0.copy()
    T = np.ones_like(s)
    live = c > 0
    # rear ramp: s + r grows like exp(c tau / r) until it reaches 0
    m = live & (s < 0)
    if np.any(m):
        need = (r / c[m]) * np.log(r / (s[m] + r))
        done = need >= T[m]
        sm = s[m]
        sm = np.where(done, (sm + r) * np.exp(c[m] * T[m] / r) - r, 0.0)
        Tm = np.where(done, 0.0, T[m] - need)
        s[m] = sm
        T[m] = Tm
    # plateau: linear until D
    m = live & (T > 0) & (s >= 0) & (s < D)
    if np.any(m):
        need = (D - s[m]) / c[m]
        done = need >= T[m]
        s[m] = np.where(done, s[m] + c[m] * T[m], D)
        T[m] = np.where(done, 0.0, T[m] - need)
    # front ramp: D + r - s decays like exp(-c tau / r)
    m = live & (T > 0) & (s >= D)
    if np.any(m):
        s[m] = D + r - (D + r - s[m]) * np.exp(-c[m] * T[m] / r)
    return s


@dataclass(frozen=True)
class Bump:
    """Flow moving ``start`` to ``start + move`` (lifted coordinates)."""

    start: tuple[float, float]
    move: tuple[float, float]
    radius: float

    @property
    def length(self) -> float:
        return math.hypot(*self.move)

    def apply(self, Y: np.ndarray) -> np.ndarray:
        D = self.length
        if D == 0.0:
            return Y
        r = self.radius
        u = np.asarray(self.move) / D
        n = np.array([-u[1], u[0]])
        out = Y.copy()
        base = Y - np.asarray(self.start)
        for k in _SHIFTS:
            p = base + k
            s = p @ u
            t = p @ n
            inside = (s > -r) & (s < D + r) & (np.abs(t) < r)
            if not np.any(inside):
                continue
            si, ti = s[inside], np.abs(t[inside])
            alpha = np.clip((r - ti) / (r / 2), 0.0, 1.0)
            s1 = _ramp_flow(si, D * alpha, D, r)
            step = s1 - si
            out[inside] = Y[inside] + step[:, None] * u
        # the anchor itself lands exactly on the target
        hit = np.all(Y == np.asarray(self.start), axis=1)
        if np.any(hit):
            out[hit] = np.asarray(self.start) + np.asarray(self.move)
        return out

    def lipschitz(self) -> float:
        D = self.length
        if D == 0.0:
            return 1.0
        # |grad X| <= D (|gamma'| + |alpha'|) <= D (1/r + 2/r)
        return math.exp(3.0 * D / self.radius)


@dataclass(frozen=True)
class PerturbationPatch:
    """Finite relocation x -> sigma(x) for the image points of a lift.

    ``points`` are lifted points x; ``targets`` are lifted points sigma(x)
    meant as the new value of the lift at x, so the move is
    targets - F(points) and must be shorter than ``epsilon``. Rows with
    targets equal to F(points) pin those images: no other bump may move them.
    """

    points: np.ndarray
    targets: np.ndarray
    epsilon: float
    support_radius: float | None = None

    def displacements(self, L: LiftMap) -> np.ndarray:
        return np.asarray(self.targets, dtype=float) - L(np.asarray(self.points, dtype=float))


def _segment_point_gap(a, e, P):
    """Toroidal distance from points P to the segment a + [0,1] e."""
    best = np.full(len(P), np.inf)
    L2 = float(e @ e)
    for k in _SHIFTS:
        d = P + k - a
        t = np.clip((d @ e) / L2, 0.0, 1.0) if L2 > 0 else np.zeros(len(P))
        best = np.minimum(best, np.hypot(*(d - t[:, None] * e).T))
    return best


def _segment_segment_gap(a, e, b, f):
    """Toroidal distance between segments a + [0,1] e and b + [0,1] f."""
    den = e[0] * f[1] - e[1] * f[0]
    if den != 0.0:
        for k in _SHIFTS:
            w = b + k - a
            s = (w[0] * f[1] - w[1] * f[0]) / den
            t = (w[0] * e[1] - w[1] * e[0]) / den
            if 0.0 <= s <= 1.0 and 0.0 <= t <= 1.0:
                return 0.0
    # disjoint segments: the gap is attained at an endpoint
    return float(min(_segment_point_gap(a, e, np.array([b, b + f])).min(),
                     _segment_point_gap(b, f, np.array([a, a + e])).min()))


def plan_bumps(L: LiftMap, patch: PerturbationPatch) -> list[Bump]:
    X = np.asarray(patch.points, dtype=float).reshape(-1, 2)
    T = np.asarray(patch.targets, dtype=float).reshape(-1, 2)
    if len(X) != len(T):
        raise ValueError("points and targets differ in length")
    if not 0 < patch.epsilon:
        raise ValueError("epsilon must be positive")
    for grp, what in ((X, "points"), (T, "targets")):
        if len(grp) > 1:
            d = _torus_gaps(grp[:, None, :] - grp[None, :, :])
            np.fill_diagonal(d, np.inf)
            if np.min(d) < 1e-12:
                raise ValueError(f"relocation is not injective: repeated {what}")
    A = L(X)
    E = T - A
    lens = np.hypot(E[:, 0], E[:, 1])
    if np.any(config.vector_norm(E) >= patch.epsilon):
        raise ValueError("relocation distance must be smaller than epsilon")
    moving = np.nonzero(lens > 0)[0]
    fixed = np.nonzero(lens == 0)[0]
    if len(moving) == 0:
        return []
    gap = np.inf
    for ii, i in enumerate(moving):
        if len(fixed):
            gap = min(gap, 2.0 * float(_segment_point_gap(A[i], E[i], A[fixed]).min()))
        for j in moving[ii + 1:]:
            gap = min(gap, _segment_segment_gap(A[i], E[i], A[j], E[j]))
    dmax = float(lens.max())
    r = 0.9 * min(gap / (2 * math.sqrt(2)), (1.0 - dmax) / (2 * math.sqrt(2)))
    if patch.support_radius is not None:
        if patch.support_radius > r:
            raise ValueError("patch infeasible at this epsilon: requested support radius too large")
        r = patch.support_radius
    if not r > 1e-12:
        raise ValueError("patch infeasible at this epsilon")
    return [Bump(tuple(A[i]), tuple(E[i]), r) for i in moving]


@dataclass(frozen=True)
class PerturbedMap(LiftMap):
    """Lift of B o f, with B a product of disjointly supported bumps."""

    base: LiftMap | None = None
    bumps: tuple[Bump, ...] = ()
    notes: tuple[str, ...] = field(default=())

    @property
    def kind(self) -> str:
        return "perturbed"

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        Y = self.base(z.reshape(-1, 2))
        for b in self.bumps:
            Y = b.apply(Y)
        Y = Y + np.asarray(self.offset)
        return Y[0] if z.ndim == 1 else Y.reshape(z.shape)

    def phi(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        w = np.mod(z.reshape(-1, 2), 1.0)
        out = self(w) - w
        return out[0] if z.ndim == 1 else out.reshape(z.shape)

    def _phi(self, z):
        return self(z) - z

    def describe(self) -> dict:
        return {"family": "perturbed", "base": self.base.describe(), "offset": list(self.offset),
                "bumps": [{"start": list(b.start), "move": list(b.move), "radius": b.radius}
                          for b in self.bumps],
                "notes": list(self.notes)}


def c0_move(L: LiftMap, patch: PerturbationPatch) -> PerturbedMap:
    """Homeomorphism g with g = sigma on the patch points and d(f, g) < eps."""
    bumps = plan_bumps(L, patch)
    lip_b = math.prod(b.lipschitz() for b in bumps) if bumps else 1.0
    notes = ("conservativity broken",) if (L.conservative and bumps) else ()
    lip_lift = lip_b * L.lip_lift
    return PerturbedMap(lip_phi=lip_lift + 1.0, lip_lift=lip_lift, conservative=L.conservative and not bumps,
                        base=L, bumps=tuple(bumps), notes=notes)


def c0_distance(L: LiftMap, G: LiftMap, resolution: int = 512, extra: np.ndarray | None = None) -> float:
    """Sup of |G - L| over a dense grid plus optional extra points."""
    Z = _grid(resolution)
    if extra is not None:
        Z = np.vstack([Z, np.asarray(extra, dtype=float).reshape(-1, 2)])
    D = G(Z) - L(Z)
    return float(np.max(config.vector_norm(D)))


def perturbation_size(G: PerturbedMap, resolution: int = 512) -> float:
    """Measured d_C0 between a perturbed lift and its base.

    The base is onto, so this is the largest bump displacement over image
    space: a dense grid plus the bump anchors, where each bump attains its
    full move.
    """
    if not G.bumps:
        return 0.0
    Y = np.vstack([_grid(resolution), np.array([b.start for b in G.bumps])])
    out = Y
    for b in G.bumps:
        out = b.apply(out)
    return float(np.max(config.vector_norm(out - Y)))


# ---------------------------------------------------------------------------
# destabilization


@dataclass
class Destabilization:
    lift: PerturbedMap
    new_vector: RationalVec2
    perturbation_size: float
    vertex: RationalVec2
    k: int
    u0: tuple[int, int]
    v0: RationalVec2
    v1: RationalVec2
    chosen: str
    budget: float
    certified_orbit: np.ndarray
    residual: float
    pair: tuple[int, int, float]

    def to_json(self) -> dict:
        return {"vertex": f"{self.vertex.x},{self.vertex.y}", "k": self.k, "u0": list(self.u0),
                "v0": str(self.v0), "v1": str(self.v1), "chosen": self.chosen,
                "new_vector": self.new_vector.to_json(),
                "perturbation_size": self.perturbation_size, "budget": self.budget,
                "residual": self.residual,
                "certified_orbit": [[float(x), float(y)] for x, y in self.certified_orbit],
                "notes": list(self.lift.notes)}


def _distance_outside(P: ConvexRationalPolygon, v: RationalVec2) -> float:
    return dist_point_scaled_polygon(v.as_float(), 1, P)


def destabilize(L: LiftMap, P: ConvexRationalPolygon, vertex, search_resolution: int = 64,
                tol: float = 1e-9) -> Destabilization:
    """Close a short loop on a periodic orbit to push the rotation set past P.

    The q-periodic orbit realising ``vertex`` has two points closer than
    2/sqrt(pi q). Jumping between them splits the orbit into two shorter
    cycles whose rotation vectors average to ``vertex``; one of them leaves
    P and is made genuine by a single bump of that size.
    """
    v = RationalVec2.of(vertex)
    q = v.denominator
    if q < 2:
        raise ValueError("vertex must have reduced denominator q > 1")
    if v not in P.vertices:
        raise ValueError("vertex is not an extremal point of P")
    search = find_periodic_orbit(L, v, resolution=search_resolution, tol=tol)
    if not search.found:
        raise ValueError(f"realization unavailable (best residual {search.residual:.3g})")
    jump = np.array(search.jump, dtype=float)
    x = search.orbit(L)
    i, j, d = find_close_pair(np.mod(x, 1.0))
    # re-index so that the pair starts the orbit: y_m = F^m(x_i)
    y = np.vstack([x[i:], x[:i] + jump])
    k = j - i
    u0 = tuple(int(c) for c in np.round(y[k] - y[0]))
    v0, v1 = split_vectors(q, v, k, u0)
    out0, out1 = not P.contains(v0), not P.contains(v1)
    if not (out0 or out1):
        raise ValueError("estimate P too large: both split vectors lie inside it")
    if out0 and out1:
        use0 = _distance_outside(P, v0) >= _distance_outside(P, v1)
    else:
        use0 = out0
    budget = pigeonhole_radius(q)
    if use0:
        idx = list(range(k))
        target = y[0] + np.array(u0, dtype=float)
        period, loop_jump, start, new = k, np.array(u0, dtype=float), y[0], v0
    else:
        idx = list(range(k, q))
        target = y[k] + jump - np.array(u0, dtype=float)
        period, loop_jump, start, new = q - k, jump - np.array(u0, dtype=float), y[k], v1
    pts = y[idx]
    targets = L(pts)
    targets[-1] = target
    patch = PerturbationPatch(pts, targets, budget)
    G = c0_move(L, patch)
    size = perturbation_size(G)
    if not size < budget:
        raise ValueError(f"perturbation {size:.6g} exceeds the budget {budget:.6g}")
    orbit = [np.asarray(start, dtype=float)]
    for _ in range(period):
        orbit.append(G(orbit[-1]))
    orbit = np.array(orbit)
    residual = float(np.hypot(*(orbit[-1] - orbit[0] - loop_jump)))
    if not residual < tol:
        raise ValueError(f"closed orbit not certified (residual {residual:.3g})")
    return Destabilization(G, new, size, v, k, u0, v0, v1, "v0" if use0 else "v1", budget,
                           orbit[:-1], residual, (i, j, d))


# ---------------------------------------------------------------------------
# stability probe


@dataclass
class StabilityVerdict:
    verdict: str
    delta: float
    grid: int
    tau: float
    inner: ConvexRationalPolygon
    outer: ConvexRationalPolygon
    orbit_hull: ConvexRationalPolygon
    orbit_error: float
    hausdorff_outer_inner: float
    hausdorff_outer_orbit: float
    excess_outer_orbit: float
    certified: bool
    destabilized: list[dict] = field(default_factory=list)
    attempts: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "delta": self.delta, "grid": self.grid, "tau": self.tau,
                "inner": self.inner.to_json(), "outer": self.outer.to_json(),
                "orbit_hull": self.orbit_hull.to_json(), "orbit_error": self.orbit_error,
                "hausdorff_outer_inner": self.hausdorff_outer_inner,
                "hausdorff_outer_orbit": self.hausdorff_outer_orbit,
                "excess_outer_orbit": self.excess_outer_orbit,
                "certified": self.certified,
                "max_vertex_denominator": max_vertex_denominator(self.delta),
                "destabilized": self.destabilized, "attempts": self.attempts}


def probe_stability(L: LiftMap, delta: float, h: float, samples: int = 64, orbit_length: int = 20000,
                    seed: int = 0, max_attempts: int = 8) -> StabilityVerdict:
    """Compare inner and outer pseudo-rotation polygons at delta/2 with orbits.

    Verdicts: ``evidence-stable`` when all three agree within
    tau = 3 (r_h + omega(r_h)); ``unstable`` when the outer polygon exceeds
    the orbit hull by more than tau plus the finite-time error, or when a
    vertex of denominator above the bound for delta is destabilized within
    delta; ``inconclusive`` otherwise.
    """
    N = int(round(1.0 / h))
    half = delta / 2.0
    inner = pseudo_rotation_set(build_graph(L, h, half, "inner"))
    outer = pseudo_rotation_set(build_graph(L, h, half, "outer"))
    hull = orbit_hull_estimate(L, samples, orbit_length, seed=seed)
    tau = 3.0 * outer_slack(L, N)
    h_oi = hausdorff(outer.polygon, inner.polygon)
    h_oo = hausdorff(outer.polygon, hull.polygon)
    ex = excess(outer.polygon, hull.polygon)
    common = dict(delta=float(delta), grid=N, tau=tau, inner=inner.polygon, outer=outer.polygon,
                  orbit_hull=hull.polygon, orbit_error=hull.error_radius,
                  hausdorff_outer_inner=h_oi, hausdorff_outer_orbit=h_oo, excess_outer_orbit=ex,
                  certified=inner.certified and outer.certified)
    if ex > tau + hull.error_radius:
        return StabilityVerdict("unstable", **common)
    bound = max_vertex_denominator(delta)
    attempts, wins = [], []
    for vtx in sorted(outer.polygon.vertices, key=lambda w: w.denominator):
        if len(attempts) >= max_attempts:
            break
        if vtx.denominator <= bound or vtx.denominator < 2:
            continue
        try:
            res = destabilize(L, outer.polygon, vtx)
        except ValueError as exc:
            attempts.append({"vertex": str(vtx), "outcome": str(exc)})
            continue
        attempts.append({"vertex": str(vtx), "outcome": "destabilized"})
        if res.perturbation_size < delta:
            wins.append(res.to_json())
    if wins:
        return StabilityVerdict("unstable", destabilized=wins, attempts=attempts, **common)
    verdict = "evidence-stable" if (h_oi <= tau and h_oo <= tau + hull.error_radius) else "inconclusive"
    return StabilityVerdict(verdict, attempts=attempts, **common)
