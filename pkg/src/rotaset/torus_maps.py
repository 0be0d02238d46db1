"""Lifts of torus homeomorphisms isotopic to the identity.

A lift is written ``F(z) = z + phi(z mod 1)`` with a Z^2-periodic
displacement ``phi``. Every map carries two Lipschitz constants, one for the
displacement and one for the lift itself; the certified modulus of
continuity used throughout the package is ``omega(t) = lip_lift * t``.

Shipped families (``family`` name, parameters):

* ``translation`` (a, b): phi = (a, b).
* ``shear`` (r): phi = (r sin 2 pi y, 0).
* ``coupled_shear`` (a, b, r, s): composition of a horizontal and a vertical
  shear, x' = x + a + r sin 2 pi y, y' = y + b + s sin 2 pi x'. Area
  preserving and always a homeomorphism.
* ``pinned`` (p0, p1, q, c, cy): skew product
  x' = x + a(y) - c/(2 pi q) sin 2 pi q x,  y' = y - cy/(4 pi) sin 4 pi y,
  with a(y) = p0/q + (p1 - p0)/q * (1 - cos 2 pi y)/2. The horizontal circles
  y = 0 and y = 1/2 are attracting and carry periodic orbits through x = 0
  with rotation vectors (p0/q, 0) and (p1/q, 0).
* ``grid``: displacement samples on an N x N grid, bilinear interpolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from . import config

TWO_PI = 2.0 * math.pi


def _as_points(z) -> tuple[np.ndarray, bool]:
    z = np.asarray(z, dtype=float)
    return z.reshape(-1, 2), z.ndim == 1


@dataclass(frozen=True)
class LiftMap:
    """Base class; subclasses implement :meth:`_phi` on points of [0,1)^2.

    ``offset`` is a constant added to the displacement (composition with a
    rigid rotation of the torus).
    """

    lip_phi: float
    lip_lift: float
    conservative: bool = False
    offset: tuple[float, float] = (0.0, 0.0)

    @property
    def kind(self) -> str:
        raise NotImplementedError

    def _phi(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def phi(self, z) -> np.ndarray:
        z, single = _as_points(z)
        out = self._phi(np.mod(z, 1.0)) + np.asarray(self.offset)
        return out[0] if single else out

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return z + self.phi(z)

    def omega(self, t: float) -> float:
        """Certified modulus of continuity of the lift."""
        return self.lip_lift * t

    def phi_modulus(self, t: float) -> float:
        return self.lip_phi * t

    def iterate(self, z, n: int) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        for _ in range(n):
            z = self(z)
        return z

    def describe(self) -> dict:
        return {"family": self.kind, "offset": list(self.offset), "conservative": self.conservative}


@dataclass(frozen=True)
class FamilyMap(LiftMap):
    family: str = "translation"
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.family

    def _phi(self, z):
        p = self.params
        x, y = z[:, 0], z[:, 1]
        if self.family == "translation":
            out = np.zeros_like(z)
            out[:, 0] = p["a"]
            out[:, 1] = p["b"]
            return out
        if self.family == "shear":
            return np.stack([p["r"] * np.sin(TWO_PI * y), np.zeros_like(x)], axis=1)
        if self.family == "coupled_shear":
            dx = p["a"] + p["r"] * np.sin(TWO_PI * y)
            dy = p["b"] + p["s"] * np.sin(TWO_PI * (x + dx))
            return np.stack([dx, dy], axis=1)
        if self.family == "pinned":
            q = p["q"]
            a = p["p0"] / q + (p["p1"] - p["p0"]) / q * (1.0 - np.cos(TWO_PI * y)) / 2.0
            dx = a - p["c"] / (TWO_PI * q) * np.sin(TWO_PI * q * x)
            dy = -p["cy"] / (2.0 * TWO_PI) * np.sin(2.0 * TWO_PI * y)
            return np.stack([dx, dy], axis=1)
        raise ValueError(f"unknown family {self.family!r}")

    def describe(self) -> dict:
        d = super().describe()
        d["params"] = dict(self.params)
        return d


def _family_lipschitz(family: str, p: Mapping[str, float]) -> tuple[float, float]:
    if family == "translation":
        return 0.0, 1.0
    if family == "shear":
        L = TWO_PI * abs(p["r"])
        return L, 1.0 + L
    if family == "coupled_shear":
        lx, ly = TWO_PI * abs(p["r"]), TWO_PI * abs(p["s"])
        return math.hypot(lx, ly * (1.0 + lx)), (1.0 + lx) * (1.0 + ly)
    if family == "pinned":
        # Frobenius bounds on the Jacobians.
        da = math.pi * abs(p["p1"] - p["p0"]) / p["q"]
        c, cy = abs(p["c"]), abs(p["cy"])
        lphi = math.sqrt(c * c + da * da + cy * cy)
        llift = math.sqrt((1 + c) ** 2 + da * da + (1 + cy) ** 2)
        return lphi, llift
    raise ValueError(f"unknown family {family!r}")


_REQUIRED = {
    "translation": ("a", "b"),
    "shear": ("r",),
    "coupled_shear": ("a", "b", "r", "s"),
    "pinned": ("p0", "p1", "q", "c", "cy"),
}


def make_family(family: str, conservative: bool | None = None, **params) -> FamilyMap:
    if family not in _REQUIRED:
        raise ValueError(f"unknown family {family!r}")
    defaults = {"coupled_shear": {"a": 0.0, "b": 0.0}, "translation": {"b": 0.0},
                "pinned": {"c": 0.8, "cy": 0.8}}
    p = {**defaults.get(family, {}), **params}
    missing = [k for k in _REQUIRED[family] if k not in p]
    if missing:
        raise ValueError(f"family {family!r} missing parameters {missing}")
    p = {k: float(p[k]) for k in _REQUIRED[family]}
    if family == "pinned":
        if p["q"] < 1 or p["q"] != int(p["q"]):
            raise ValueError("pinned family needs an integer q >= 1")
        if not (abs(p["c"]) < 1 and abs(p["cy"]) < 1):
            raise ValueError("pinned family is a homeomorphism only for |c|, |cy| < 1")
    lphi, llift = _family_lipschitz(family, p)
    if conservative is None:
        conservative = family in ("translation", "shear", "coupled_shear")
    return FamilyMap(lip_phi=lphi, lip_lift=llift, conservative=conservative,
                     family=family, params=p)


def translation(a: float, b: float = 0.0) -> FamilyMap:
    return make_family("translation", a=a, b=b)


def identity() -> FamilyMap:
    return translation(0.0, 0.0)


def shear(r: float) -> FamilyMap:
    return make_family("shear", r=r)


def coupled_shear(r: float, s: float, a: float = 0.0, b: float = 0.0) -> FamilyMap:
    return make_family("coupled_shear", a=a, b=b, r=r, s=s)


def pinned(p0: int, p1: int, q: int, c: float = 0.8, cy: float = 0.8) -> FamilyMap:
    return make_family("pinned", p0=p0, p1=p1, q=q, c=c, cy=cy)


@dataclass(frozen=True, eq=False)
class GridMap(LiftMap):
    """Bilinear interpolation of displacement samples.

    ``data[i, j]`` is phi at (j/N, i/N): rows run along y, columns along x.
    """

    data: np.ndarray = field(default_factory=lambda: np.zeros((1, 1, 2)))

    @property
    def kind(self) -> str:
        return "grid"

    def _phi(self, z):
        N = self.data.shape[0]
        gx, gy = z[:, 0] * N, z[:, 1] * N
        j0, i0 = np.floor(gx).astype(int), np.floor(gy).astype(int)
        tx, ty = (gx - j0)[:, None], (gy - i0)[:, None]
        j0, i0 = j0 % N, i0 % N
        j1, i1 = (j0 + 1) % N, (i0 + 1) % N
        d = self.data
        return ((1 - tx) * (1 - ty) * d[i0, j0] + tx * (1 - ty) * d[i0, j1]
                + (1 - tx) * ty * d[i1, j0] + tx * ty * d[i1, j1])

    def describe(self) -> dict:
        d = super().describe()
        d["resolution"] = int(self.data.shape[0])
        return d


def grid_map(data: np.ndarray, conservative: bool = False) -> GridMap:
    data = np.asarray(data, dtype=float)
    if data.ndim != 3 or data.shape[0] != data.shape[1] or data.shape[2] != 2:
        raise ValueError("grid data must have shape (N, N, 2)")
    if not np.all(np.isfinite(data)):
        raise ValueError("grid data contains non-finite values")
    N = data.shape[0]
    dxs = np.hypot(*(np.roll(data, -1, axis=1) - data).transpose(2, 0, 1))
    dys = np.hypot(*(np.roll(data, -1, axis=0) - data).transpose(2, 0, 1))
    lphi = math.hypot(dxs.max(), dys.max()) * N
    return GridMap(lip_phi=lphi, lip_lift=1.0 + lphi, conservative=conservative, data=data)


@dataclass(frozen=True, eq=False)
class CallableMap(LiftMap):
    """Displacement given by an arbitrary vectorised callable on [0,1)^2.

    Periodicity is not enforced; :func:`verify_lift` reports seam defects.
    """

    fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "callable"

    @property
    def kind(self) -> str:
        return self.name

    def _phi(self, z):
        return np.asarray(self.fn(z), dtype=float).reshape(-1, 2)


def compose_rotation(L: LiftMap, v) -> LiftMap:
    """Lift of R_v o f: the displacement gains the constant ``v``."""
    v = np.asarray(v, dtype=float)
    return replace(L, offset=(float(L.offset[0] + v[0]), float(L.offset[1] + v[1])))


def canonical_offset(L: LiftMap) -> tuple[int, int]:
    """Integer m with phi(0,0) - m in [0,1)^2."""
    p = L.phi(np.zeros(2))
    return int(math.floor(p[0])), int(math.floor(p[1]))


def canonicalize(L: LiftMap) -> tuple[LiftMap, tuple[int, int]]:
    m = canonical_offset(L)
    if m == (0, 0):
        return L, m
    return compose_rotation(L, (-m[0], -m[1])), m


def eval_lift(L: LiftMap, z) -> np.ndarray:
    return L(z)


def _grid(M: int, centered: bool = False) -> np.ndarray:
    s = (np.arange(M) + (0.5 if centered else 0.0)) / M
    X, Y = np.meshgrid(s, s)
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def _float_hull_diameter(P: np.ndarray) -> float:
    P = np.unique(np.round(P, 15), axis=0)
    if len(P) == 1:
        return 0.0
    try:
        from scipy.spatial import ConvexHull
        H = P[ConvexHull(P).vertices]
    except Exception:  # degenerate (collinear) sample
        H = P
        if len(H) > 2000:
            # collinear: extent along the principal direction
            d = H - H.mean(axis=0)
            u = np.linalg.svd(d, full_matrices=False)[2][0]
            t = d @ u
            H = H[[np.argmin(t), np.argmax(t)]]
    diff = H[:, None, :] - H[None, :, :]
    return float(np.max(np.hypot(diff[..., 0], diff[..., 1])))


@dataclass(frozen=True)
class OscResult:
    grid_value: float
    certified_bound: float
    resolution: int


def osc(L: LiftMap, resolution: int = 256) -> OscResult:
    """Diameter of phi(T^2): grid estimate and certified upper bound.

    Every point of the torus is within h*sqrt(2)/2 of a grid node, so the
    true diameter exceeds the grid diameter by at most 2 * omega_phi of that.
    """
    P = L.phi(_grid(resolution))
    g = _float_hull_diameter(P)
    h = 1.0 / resolution
    return OscResult(g, g + 2.0 * L.phi_modulus(h * math.sqrt(2) / 2), resolution)


@dataclass(frozen=True)
class PseudoOrbit:
    """Lifted points x_0..x_n with per-step tolerance ``delta`` (0: orbit)."""

    points: np.ndarray
    delta: float

    def defects(self, L: LiftMap) -> np.ndarray:
        p = np.asarray(self.points, dtype=float)
        return config.vector_norm(L(p[:-1]) - p[1:])

    def is_valid(self, L: LiftMap, roundoff: float = 1e-9) -> bool:
        d = self.defects(L)
        if len(d) == 0:
            return True
        if self.delta == 0:
            return bool(np.max(d) <= roundoff)
        return bool(np.max(d) < self.delta)


@dataclass
class LiftReport:
    periodicity_defect: float
    folded_cells: int
    collisions: int
    degree: float
    osc_grid: float
    osc_bound: float
    area_defect: float | None
    notes: list[str]

    @property
    def passed(self) -> bool:
        return (self.periodicity_defect <= 1e-9 and self.folded_cells == 0
                and self.collisions == 0 and abs(self.degree - 1.0) < 1e-6)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "periodicity_defect": self.periodicity_defect,
            "folded_cells": self.folded_cells,
            "collisions": self.collisions,
            "degree": self.degree,
            "osc_grid": self.osc_grid,
            "osc_bound": self.osc_bound,
            "area_defect": self.area_defect,
            "notes": list(self.notes),
        }


def verify_lift(L: LiftMap, resolution: int = 64, area_samples: int = 64, seed: int = 0) -> LiftReport:
    """Numerical sanity checks of a lift.

    Structural problems (non-finite values) raise; dynamical defects are
    only reported.
    """
    M = resolution
    s = np.arange(M + 1) / M
    X, Y = np.meshgrid(s, s)
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    img = L(nodes)
    if not np.all(np.isfinite(img)):
        raise ValueError("lift produced non-finite values")

    # Seam: phi just below 1 against phi at 0.
    eta = 1e-9
    t = (np.arange(M) + 0.5) / M
    left = np.stack([np.zeros(M), t], axis=1)
    right = np.stack([np.full(M, 1 - eta), t], axis=1)
    bottom = np.stack([t, np.zeros(M)], axis=1)
    top = np.stack([t, np.full(M, 1 - eta)], axis=1)
    jump = max(np.max(np.hypot(*(L.phi(right) - L.phi(left)).T)),
               np.max(np.hypot(*(L.phi(top) - L.phi(bottom)).T)))
    seam = max(0.0, float(jump) - L.phi_modulus(eta))

    # Orientation of the piecewise-linear image of each grid triangle. The
    # lift is evaluated on lifted nodes so the images are consistent.
    I = img.reshape(M + 1, M + 1, 2)
    p00, p10, p01, p11 = I[:-1, :-1], I[:-1, 1:], I[1:, :-1], I[1:, 1:]

    def signed(a, b, c):
        return 0.5 * ((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                      - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    t1, t2 = signed(p00, p10, p11), signed(p00, p11, p01)
    folded = int(np.count_nonzero((t1 <= 0) | (t2 <= 0)))
    degree = float(t1.sum() + t2.sum())

    # Collisions between images of distinct interior nodes on the torus.
    pts = np.mod(L(_grid(M)), 1.0)
    tol = 1e-3 / M
    tree = cKDTree(pts, boxsize=1.0 + 1e-12)
    collisions = len(tree.query_pairs(tol))

    og = osc(L, resolution=max(M, 64))
    notes = []
    if og.certified_bound > 1.0:
        notes.append(f"large oscillation: osc <= {og.certified_bound:.4g}")
    area_defect = None
    if L.conservative:
        rng = np.random.default_rng(seed)
        side = 1.0 / (4 * M)
        k = 64
        u = np.linspace(0, 1, k, endpoint=False)
        unit = np.concatenate([np.stack([u, 0 * u], 1), np.stack([1 + 0 * u, u], 1),
                               np.stack([1 - u, 1 + 0 * u], 1), np.stack([0 * u, 1 - u], 1)])
        worst = 0.0
        for c in rng.random((area_samples, 2)):
            im = L(c + side * unit)
            xs, ys = im[:, 0], im[:, 1]
            a = 0.5 * abs(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1)))
            worst = max(worst, abs(a / side ** 2 - 1.0))
        area_defect = float(worst)
        if worst > 1e-2:
            notes.append("conservative flag set but image areas differ from source areas")
    if seam > 1e-9:
        notes.append("displacement is not Z^2-periodic")
    if folded:
        notes.append("image of the grid folds: map is not locally injective at this resolution")
    return LiftReport(seam, folded, collisions, degree, og.grid_value, og.certified_bound,
                      area_defect, notes)


def load_map_config(path: str | Path) -> LiftMap:
    """Read a map configuration file (JSON).

    ``{"family": name, "params": {...}, "conservative": bool}`` or
    ``{"family": "grid", "resolution": N, "data": path}`` where the data file
    holds N*N*2 little-endian float32 values in row-major order.
    """
    path = Path(path)
    cfg = json.loads(path.read_text())
    return map_from_config(cfg, base=path.parent)


def map_from_config(cfg: dict, base: Path | None = None) -> LiftMap:
    fam = cfg.get("family")
    if fam is None:
        raise ValueError("map config needs a 'family' entry")
    conservative = cfg.get("conservative")
    if fam == "grid":
        N = int(cfg["resolution"])
        dpath = Path(cfg["data"])
        if base is not None and not dpath.is_absolute():
            dpath = base / dpath
        raw = np.fromfile(dpath, dtype="<f4")
        if raw.size != N * N * 2:
            raise ValueError(f"grid data has {raw.size} values, expected {N * N * 2}")
        L = grid_map(raw.reshape(N, N, 2).astype(float), conservative=bool(conservative))
    else:
        L = make_family(fam, conservative=conservative, **cfg.get("params", {}))
    if "offset" in cfg:
        L = compose_rotation(L, cfg["offset"])
    return L


def map_to_config(L: LiftMap) -> dict:
    if isinstance(L, FamilyMap):
        cfg = {"family": L.family, "params": dict(L.params), "conservative": L.conservative}
        if L.offset != (0.0, 0.0):
            cfg["offset"] = list(L.offset)
        return cfg
    return L.describe()
