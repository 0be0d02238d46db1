"""Rigorous and empirical estimates of rotation sets of torus homeomorphisms."""

from .config import get_norm, set_norm
from .geometry import ConvexRationalPolygon, RationalVec2, convex_hull, hausdorff, max_vertex_denominator
from .torus_maps import LiftMap, compose_rotation, coupled_shear, identity, make_family, pinned, shear, translation
from .transition_graph import build_graph, max_mean_cycle, pseudo_rotation_set

__all__ = [
    "ConvexRationalPolygon", "LiftMap", "RationalVec2", "build_graph", "compose_rotation", "convex_hull",
    "coupled_shear", "get_norm", "hausdorff", "identity", "make_family", "max_mean_cycle",
    "max_vertex_denominator", "pinned", "pseudo_rotation_set", "set_norm", "shear", "translation",
]
