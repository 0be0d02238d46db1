"""Orbit and measure based estimates of the rotation set.

Finite orbits only give inner estimates: a Birkhoff vector of length n is
reported with the radius 2 sup|phi| / n and never as a bare point. The mean
displacement for Lebesgue measure comes with a quadrature error bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .geometry import ConvexRationalPolygon, RationalVec2, rational_polygon_from_floats
from .torus_maps import LiftMap, _grid


def sup_displacement(L: LiftMap, resolution: int = 256) -> float:
    """Upper bound for sup |phi| (Euclidean) from a grid scan."""
    P = L.phi(_grid(resolution))
    slack = L.phi_modulus(math.sqrt(2) / (2 * resolution))
    return float(np.max(np.hypot(P[:, 0], P[:, 1])) + slack)


def _two_prod(a: np.ndarray, b: float) -> tuple[np.ndarray, np.ndarray]:
    # Dekker: a * b = p + e exactly
    split = 134217729.0  # 2^27 + 1
    p = a * b
    t = split * a
    ah = t - (t - a)
    al = a - ah
    t = split * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _birkhoff_batch(L: LiftMap, Z: np.ndarray, n: int) -> np.ndarray:
    # Positions are kept in [0,1)^2 and the displacement sum is carried as
    # an unevaluated pair hi + lo (two-sum per step), so the mean does not
    # degrade with n and a constant displacement is returned exactly.
    w = np.mod(Z, 1.0)
    hi = np.zeros_like(Z)
    lo = np.zeros_like(Z)
    for _ in range(n):
        d = L.phi(w)
        s = hi + d
        bb = s - hi
        lo += (hi - (s - bb)) + (d - bb)
        hi = s
        w = np.mod(w + d, 1.0)
    q = hi / n
    p, e = _two_prod(q, float(n))
    return q + (((hi - p) - e) + lo) / n


def birkhoff_vector(L: LiftMap, z: Sequence[float], n: int) -> np.ndarray:
    """(F^n(z) - z) / n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = np.asarray(z, dtype=float).reshape(1, 2)
    return _birkhoff_batch(L, z, int(n))[0]


def birkhoff_vectors(L: LiftMap, Z: np.ndarray, n: int) -> np.ndarray:
    """Row-wise :func:`birkhoff_vector` for an (S, 2) array of base points."""
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    return _birkhoff_batch(L, Z, int(n))


@dataclass(frozen=True)
class OrbitEstimate:
    base_point: tuple[float, float]
    n: int
    vector: tuple[float, float]
    error_radius: float


def orbit_estimates(L: LiftMap, Z: np.ndarray, n: int) -> list[OrbitEstimate]:
    V = birkhoff_vectors(L, Z, n)
    r = 2.0 * sup_displacement(L) / n
    return [OrbitEstimate((float(z[0]), float(z[1])), int(n), (float(v[0]), float(v[1])), r)
            for z, v in zip(np.asarray(Z, dtype=float).reshape(-1, 2), V)]


def write_birkhoff_csv(path: str | Path, estimates: Sequence[OrbitEstimate]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["z0x", "z0y", "n", "vx", "vy", "err_radius"])
        for e in estimates:
            wr.writerow([repr(e.base_point[0]), repr(e.base_point[1]), e.n,
                         repr(e.vector[0]), repr(e.vector[1]), repr(e.error_radius)])


def sample_base_points(S: int, seed: int = 0) -> np.ndarray:
    """First S points of a scrambled Sobol sequence on [0,1)^2.

    The sets are nested in S for a fixed seed, and every dyadic block of
    size 2^k holds exactly one point per cell of a balanced 2^k partition.
    """
    if S < 1:
        raise ValueError("S must be >= 1")
    m = max(0, math.ceil(math.log2(S)))
    pts = qmc.Sobol(d=2, scramble=True, seed=seed).random_base2(m)
    return pts[:S]


@dataclass(frozen=True)
class OrbitHull:
    polygon: ConvexRationalPolygon
    error_radius: float
    vectors: np.ndarray
    base_points: np.ndarray
    n: int

    def to_json(self) -> dict:
        d = self.polygon.to_json()
        d.update({"error_radius": self.error_radius, "n": self.n, "samples": len(self.vectors)})
        return d


def orbit_hull_estimate(L: LiftMap, S: int, n: int, seed: int = 0) -> OrbitHull:
    """Hull of S Birkhoff vectors: an inner estimate up to ``error_radius``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    Z = sample_base_points(S, seed)
    V = birkhoff_vectors(L, Z, n)
    return OrbitHull(rational_polygon_from_floats(V), 2.0 * sup_displacement(L) / n, V, Z, int(n))


@dataclass(frozen=True)
class LebesgueEstimate:
    vector: tuple[float, float]
    error_bound: float
    resolution: int


def lebesgue_rotation_vector(L: LiftMap, resolution: int = 256) -> LebesgueEstimate:
    """Midpoint-rule mean of phi over the torus.

    Each cell average differs from the centre value by at most the phi
    modulus at half the cell diagonal. The rule is exact for trigonometric
    polynomials of degree below the resolution.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    v = L.phi(_grid(resolution, centered=True)).mean(axis=0)
    err = L.phi_modulus(math.sqrt(2) / (2 * resolution))
    return LebesgueEstimate((float(v[0]), float(v[1])), float(err), resolution)


# ---------------------------------------------------------------------------
# periodic orbits

_COMPASS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)


@dataclass(frozen=True)
class PeriodicSearch:
    """Outcome of :func:`find_periodic_orbit`; ``point`` is None on failure."""

    target: RationalVec2
    period: int
    jump: tuple[int, int]
    point: np.ndarray | None
    residual: float

    @property
    def found(self) -> bool:
        return self.point is not None

    def orbit(self, L: LiftMap) -> np.ndarray:
        """Lifted points z, F(z), ..., F^(q-1)(z)."""
        if self.point is None:
            raise ValueError("no periodic point")
        pts = [np.asarray(self.point, dtype=float)]
        for _ in range(self.period - 1):
            pts.append(L(pts[-1]))
        return np.array(pts)


def periodic_residual(L: LiftMap, Z: np.ndarray, q: int, jump: Sequence[int]) -> np.ndarray:
    """|F^q(z) - z - jump| row-wise."""
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)
    R = L.iterate(Z, q) - Z - np.asarray(jump, dtype=float)
    return np.hypot(R[:, 0], R[:, 1])


def _refine(L, z, r, q, jump, step, tol, max_evals):
    evals = 0
    while r >= tol and step > 1e-15 and evals < max_evals:
        cand = z + step * _COMPASS
        rc = periodic_residual(L, cand, q, jump)
        evals += len(cand)
        i = int(np.argmin(rc))
        if rc[i] < r:
            z, r = cand[i], float(rc[i])
        else:
            step *= 0.5
    return z, r


def find_periodic_orbit(L: LiftMap, target, resolution: int = 64, tol: float = 1e-9,
                        candidates: int = 16, max_evals: int = 20000) -> PeriodicSearch:
    """Search z with F^q(z) = z + (p1, p2) for target (p1/q, p2/q).

    A residual scan over a resolution x resolution grid ranks candidates
    (ties in scan order, so the origin comes first); each is then refined by
    a shrinking compass search, which needs no derivatives.
    """
    t = RationalVec2.of(target)
    q = t.denominator
    jump = (int(t.x * q), int(t.y * q))
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    Z = _grid(resolution)
    res = periodic_residual(L, Z, q, jump)
    order = np.argsort(res, kind="stable")
    best_z, best_r = Z[order[0]], float(res[order[0]])
    if best_r < tol:
        return PeriodicSearch(t, q, jump, best_z.copy(), best_r)
    for idx in order[:candidates]:
        z, r = _refine(L, Z[idx], float(res[idx]), q, jump, 0.5 / resolution, tol, max_evals)
        if r < best_r:
            best_z, best_r = z, r
        if r < tol:
            return PeriodicSearch(t, q, jump, np.asarray(z, dtype=float), r)
    return PeriodicSearch(t, q, jump, None, best_r)
