"""Rotational deviations of orbits and pseudo-orbits from a polygon.

The deviation of a trajectory at time n is the distance from its total
displacement x_n - x_0 to the scaled polygon nP. Traces are kept sparse:
values at log-spaced checkpoints plus the running maximum and its argmax.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import ConvexRationalPolygon, scaled_vertex_distance
from .torus_maps import LiftMap

NOISE_MODES = ("uniform", "boundary", "direction")
# strictly inside the open delta-ball
_INSIDE = 1.0 - 1e-6


def deviation_constant(osc_value: float, epsilon: float, kind: str = "pseudo") -> float:
    """Uniform deviation bound for an epsilon-upper-stable rotation set.

    ``pseudo`` covers epsilon/2-pseudo-orbits, ``orbit`` true orbits.
    """
    if not 0 < epsilon < 1:
        raise ValueError("deviation bound requires 0 < epsilon < 1")
    if osc_value < 0:
        raise ValueError("osc must be non-negative")
    if kind == "pseudo":
        return 16.0 / (math.pi * epsilon ** 2) * (osc_value + 2.0) + epsilon
    if kind == "orbit":
        return 4.0 * (osc_value + 1.0) / (math.pi * epsilon ** 2) + epsilon
    raise ValueError("kind must be 'orbit' or 'pseudo'")


def checkpoints(n_max: int, count: int = 200) -> np.ndarray:
    pts = np.unique(np.round(np.geomspace(1, n_max, count)).astype(np.int64))
    return pts[(pts >= 1) & (pts <= n_max)]


@dataclass
class DeviationReport:
    kind: str
    n_max: int
    delta: float
    noise: str
    n: np.ndarray
    deviation: np.ndarray
    max_deviation: float
    argmax_n: int
    bound: float | None

    @property
    def violated(self) -> bool:
        return self.bound is not None and self.max_deviation > self.bound

    def summary(self) -> dict:
        return {"kind": self.kind, "n_max": self.n_max, "delta": self.delta, "noise": self.noise,
                "max_deviation": self.max_deviation, "argmax_n": self.argmax_n,
                "bound_C": self.bound, "violated": self.violated}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "dev", "bound_C"])
            for n, d in zip(self.n.tolist(), self.deviation.tolist()):
                wr.writerow([n, repr(d), "" if self.bound is None else repr(self.bound)])

    def write_summary(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _noise(rng: np.random.Generator, S: int, delta: float, mode: str, direction: np.ndarray) -> np.ndarray:
    if mode == "direction":
        return np.broadcast_to(direction * (_INSIDE * delta), (S, 2))
    ang = rng.uniform(0.0, 2.0 * math.pi, S)
    rad = np.full(S, _INSIDE * delta)
    if mode == "uniform":
        rad = rad * np.sqrt(rng.uniform(0.0, 1.0, S))
    return np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)


def max_deviations(L: LiftMap, P: ConvexRationalPolygon, X0: np.ndarray, n_max: int,
                   delta: float = 0.0, noise_seed: int = 0, noise: str = "uniform",
                   direction: Sequence[float] = (1.0, 0.0), bound: float | None = None,
                   n_checkpoints: int = 200) -> list[DeviationReport]:
    """Deviation traces of S trajectories started at the rows of ``X0``.

    With delta > 0 every step adds noise of norm below delta drawn from one
    seeded stream shared by the batch; ``direction`` mode pushes every step
    the same way.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if noise not in NOISE_MODES:
        raise ValueError(f"noise must be one of {NOISE_MODES}")
    X0 = np.asarray(X0, dtype=float).reshape(-1, 2)
    S = len(X0)
    u = np.asarray(direction, dtype=float)
    if delta > 0 and noise == "direction":
        nu = math.hypot(*u)
        if nu == 0:
            raise ValueError("direction must be non-zero")
        u = u / nu
    rng = np.random.default_rng(noise_seed)
    cps = checkpoints(n_max, n_checkpoints)
    trace = np.zeros((S, len(cps)))
    run_max = np.zeros(S)
    arg = np.zeros(S, dtype=np.int64)
    w = np.mod(X0, 1.0)
    total = np.zeros_like(X0)
    ci = 0
    V = P.float_vertices()
    scale = np.empty((S, 1))
    for n in range(1, n_max + 1):
        d = L.phi(w)
        if delta > 0:
            d = d + _noise(rng, S, delta, noise, u)
        total = total + d
        w = np.mod(w + d, 1.0)
        scale.fill(n)
        dev = scaled_vertex_distance(total, scale, V)
        better = dev > run_max
        run_max = np.where(better, dev, run_max)
        arg = np.where(better, n, arg)
        if ci < len(cps) and n == cps[ci]:
            trace[:, ci] = dev
            ci += 1
    kind = "pseudo" if delta > 0 else "orbit"
    return [DeviationReport(kind, int(n_max), float(delta), noise if delta > 0 else "none", cps,
                            trace[s], float(run_max[s]), int(arg[s]), bound) for s in range(S)]


def max_deviation(L: LiftMap, P: ConvexRationalPolygon, x0: Sequence[float], n_max: int,
                  delta: float = 0.0, noise_seed: int = 0, noise: str = "uniform",
                  direction: Sequence[float] = (1.0, 0.0), bound: float | None = None) -> DeviationReport:
    return max_deviations(L, P, np.asarray(x0, dtype=float).reshape(1, 2), n_max, delta,
                          noise_seed, noise, direction, bound)[0]
