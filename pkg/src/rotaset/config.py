"""Process-wide settings.

Only the planar norm is configurable. It governs toroidal distances,
pseudo-orbit tolerances and the edge thresholds of transition graphs.
Polygon distances (Hausdorff, deviation traces) are always Euclidean.
"""

from __future__ import annotations

import numpy as np

_NORMS = ("euclidean", "sup")
_norm = "euclidean"


def set_norm(name: str) -> None:
    global _norm
    if name not in _NORMS:
        raise ValueError(f"unknown norm {name!r}; expected one of {_NORMS}")
    _norm = name


def get_norm() -> str:
    return _norm


def vector_norm(v: np.ndarray) -> np.ndarray:
    """Norm of the last axis of ``v`` under the active setting."""
    v = np.asarray(v, dtype=float)
    if _norm == "sup":
        return np.max(np.abs(v), axis=-1)
    return np.hypot(v[..., 0], v[..., 1])
