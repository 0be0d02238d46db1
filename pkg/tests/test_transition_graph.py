import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import (brute_cycle_hull, brute_max_mean, random_label_graph, simple_cycle_means,
                     torus_center_edges)
from rotaset.geometry import RationalVec2, convex_hull, hausdorff, support
from rotaset.torus_maps import coupled_shear, identity, pinned, shear, translation
from rotaset.transition_graph import (DisplacementGraph, NoCycleError, build_graph,
                                      certificate_orbit, cycle_mean_vector, max_mean_cycle,
                                      outer_slack, pseudo_rotation_polygon, pseudo_rotation_set)

F = Fraction


def ring(labels, start=0):
    k = len(labels)
    return [(start + i, start + (i + 1) % k, w) for i, w in enumerate(labels)]


# --- build_graph ---------------------------------------------------------

def test_identity_inner_graph_matches_direct_scan():
    N, delta = 16, 0.1
    G = build_graph(identity(), 1 / N, delta, "inner")
    s = (np.arange(N) + 0.5) / N
    X, Y = np.meshgrid(s, s)
    C = np.stack([X.ravel(), Y.ravel()], 1)
    assert G.edge_set() == torus_center_edges(C, N, delta)
    # without seam crossings the label is zero
    for u, v, wx, wy in G.edge_set():
        d = np.hypot(*(C[u] - C[v]))
        if d < delta:
            assert (wx, wy) == (0, 0)
    assert any(w != (0, 0) for _, _, w in G.edges())


def test_shear_outer_graph_matches_direct_scan():
    L, N, delta = shear(0.3), 16, 0.08
    G = build_graph(L, 1 / N, delta, "outer")
    s = (np.arange(N) + 0.5) / N
    X, Y = np.meshgrid(s, s)
    C = np.stack([X.ravel(), Y.ravel()], 1)
    assert G.edge_set() == torus_center_edges(L(C), N, delta + outer_slack(L, N))


def test_translation_half_cycle_means_near_vector():
    N, delta = 32, 0.05
    G = build_graph(translation(0.5, 0.0), 1 / N, delta, "inner")
    P = pseudo_rotation_polygon(G)
    slack = delta + math.sqrt(2) / N
    for v in P.vertices:
        assert math.hypot(float(v.x) - 0.5, float(v.y)) <= slack
    # every cycle mean is in P, so the support in each direction bounds them
    for d in [(1, 0), (0, 1), (-1, 0), (0, -1), (1, 1), (3, -2)]:
        val = max_mean_cycle(G, d).value
        assert float(val) <= 0.5 * d[0] + slack * math.hypot(*d) + 1e-12


@pytest.mark.parametrize("L", [shear(0.3), coupled_shear(0.3, 0.2), pinned(0, 1, 2)],
                         ids=["shear", "coupled", "pinned"])
def test_inner_edges_subset_of_outer(L):
    a = build_graph(L, 1 / 16, 0.1, "inner").edge_set()
    b = build_graph(L, 1 / 16, 0.1, "outer").edge_set()
    assert a <= b and len(b) > len(a)


def test_build_graph_guards():
    with pytest.raises(ValueError, match="grid too coarse"):
        build_graph(identity(), 1 / 4, 0.1)
    with pytest.raises(ValueError):
        build_graph(identity(), 1 / 16, 0.0)
    with pytest.raises(ValueError):
        build_graph(identity(), 1 / 16, 0.1, "middle")


def test_build_graph_deterministic():
    L = coupled_shear(0.3, 0.2)
    a, b = build_graph(L, 1 / 24, 0.1, "outer"), build_graph(L, 1 / 24, 0.1, "outer")
    for name in ("indptr", "dst", "wx", "wy"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_edge_export_roundtrip(tmp_path):
    G = build_graph(shear(0.3), 1 / 8, 0.15, "outer")
    G.export_edges(tmp_path / "e.bin")
    assert (tmp_path / "e.bin").stat().st_size == 10 * G.n_edges
    H = DisplacementGraph.import_edges(tmp_path / "e.bin", G.n_nodes)
    assert H.edge_set() == G.edge_set()


# --- max_mean_cycle ------------------------------------------------------

def test_two_node_example():
    G = DisplacementGraph.from_edges(2, [(0, 1, (1, 0)), (1, 0, (0, 0))])
    r = max_mean_cycle(G, (1, 0))
    assert r.value == F(1, 2)
    assert sorted(r.nodes) == [0, 1]


def test_two_disjoint_loops_example():
    # loops of mean x-displacement 1/3 and 2/5
    edges = ring([(1, 0), (0, 0), (0, 0)]) + ring([(1, 0), (0, 0), (1, 0), (0, 0), (0, 0)], start=3)
    G = DisplacementGraph.from_edges(8, edges)
    r = max_mean_cycle(G, (1, 0))
    assert r.value == F(2, 5)
    assert sorted(r.nodes) == [3, 4, 5, 6, 7]


def test_acyclic_graph_raises():
    G = DisplacementGraph.from_edges(3, [(0, 1, (1, 0)), (1, 2, (0, 1))])
    for method in ("karp", "howard"):
        with pytest.raises(NoCycleError, match="no cycles"):
            max_mean_cycle(G, (1, 0), method=method)
    with pytest.raises(NoCycleError):
        pseudo_rotation_polygon(G)


def test_zero_direction_rejected():
    G = DisplacementGraph.from_edges(1, [(0, 0, (1, 0))])
    with pytest.raises(ValueError):
        max_mean_cycle(G, (0, 0))


@pytest.mark.parametrize("method", ["karp", "howard"])
def test_max_mean_cycle_matches_enumeration(method):
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 150:
        n, edges = random_label_graph(rng, 8)
        if not simple_cycle_means(n, edges):
            continue
        G = DisplacementGraph.from_edges(n, edges)
        for _ in range(4):
            d = tuple(int(c) for c in rng.integers(-9, 10, size=2))
            if d == (0, 0):
                continue
            r = max_mean_cycle(G, d, method=method)
            assert r.value == brute_max_mean(n, edges, d)
            # the returned cycle attains the value
            m = cycle_mean_vector(G, (), edges=r.edges)
            assert m.x * d[0] + m.y * d[1] == r.value
        checked += 1


def test_fractional_direction_scales_value():
    G = DisplacementGraph.from_edges(2, [(0, 1, (1, 0)), (1, 0, (0, 3))])
    assert max_mean_cycle(G, (F(1, 2), F(1, 3))).value == F(1, 2) * F(1, 2) + F(3, 2) * F(1, 3)


def test_howard_agrees_with_karp_on_grid_graph():
    G = build_graph(coupled_shear(0.3, 0.2), 1 / 12, 0.1, "outer")
    for d in [(1, 0), (0, 1), (-1, 2), (5, -3), (-7, -7)]:
        assert max_mean_cycle(G, d, "howard").value == max_mean_cycle(G, d, "karp").value


# --- cycle_mean_vector ---------------------------------------------------

def test_cycle_mean_single_loop():
    G = DisplacementGraph.from_edges(1, [(0, 0, (2, -1))])
    assert cycle_mean_vector(G, [0]) == RationalVec2(2, -1)


def test_cycle_mean_four_cycle():
    G = DisplacementGraph.from_edges(4, ring([(1, 0), (0, 0), (1, 0), (0, 0)]))
    assert cycle_mean_vector(G, [0, 1, 2, 3]) == RationalVec2(F(1, 2), 0)


def test_cycle_mean_rejects_missing_edge_and_open_path():
    G = DisplacementGraph.from_edges(3, [(0, 1, (0, 0)), (1, 2, (0, 0)), (2, 0, (1, 0))])
    with pytest.raises(ValueError):
        cycle_mean_vector(G, [0, 2, 1])
    with pytest.raises(ValueError, match="not closed"):
        cycle_mean_vector(G, (), edges=[0, 1])


def test_cycle_mean_matches_float_sum():
    rng = np.random.default_rng(9)
    k = 37
    labels = [tuple(int(c) for c in rng.integers(-3, 4, size=2)) for _ in range(k)]
    G = DisplacementGraph.from_edges(k, ring(labels))
    m = cycle_mean_vector(G, list(range(k)))
    fl = np.mean(np.array(labels, dtype=float), axis=0)
    np.testing.assert_allclose(m.as_float(), fl, rtol=0, atol=1e-15)


# --- polygons ------------------------------------------------------------

def test_two_loops_in_one_component():
    edges = ring([(1, 0), (0, 0), (0, 0)]) + [(0, 3, (0, 1)), (3, 0, (0, 0))]
    G = DisplacementGraph.from_edges(4, edges)
    P = pseudo_rotation_polygon(G)
    assert P.contains((F(1, 3), 0)) and P.contains((0, F(1, 2)))
    assert P == brute_cycle_hull(4, edges)


def test_polygon_matches_brute_force_hull():
    rng = np.random.default_rng(77)
    checked = 0
    while checked < 120:
        n, edges = random_label_graph(rng, 7)
        H = brute_cycle_hull(n, edges)
        if H is None:
            continue
        R = pseudo_rotation_set(DisplacementGraph.from_edges(n, edges))
        assert R.polygon == H and R.certified
        checked += 1


def test_support_oracle_consistency_and_denominators():
    G = build_graph(coupled_shear(0.3, 0.2), 1 / 16, 0.1, "outer")
    R = pseudo_rotation_set(G)
    assert R.certified
    for d in [(1, 0), (2, 1), (-1, 3), (-4, -1), (0, -1), (7, -5)]:
        assert max_mean_cycle(G, d).value == support(R.polygon, d, exact=True)[0]
    comp = G.scc_index
    sizes = np.bincount(comp)
    src = G.src()
    for v, edges in R.cycles.items():
        assert v.denominator <= sizes[comp[src[edges[0]]]]


@pytest.mark.parametrize("L", [shear(0.3), coupled_shear(0.3, 0.2), pinned(0, 1, 2), translation(0.3, 0.1)],
                         ids=["shear", "coupled", "pinned", "translation"])
def test_inner_polygon_inside_outer(L):
    inner = pseudo_rotation_polygon(build_graph(L, 1 / 32, 0.1, "inner"))
    outer = pseudo_rotation_polygon(build_graph(L, 1 / 32, 0.1, "outer"))
    assert outer.contains_polygon(inner)


@settings(max_examples=8)
@given(st.sampled_from(["inner", "outer"]), st.floats(0.07, 0.2), st.floats(0.07, 0.2))
def test_polygon_monotone_in_delta(mode, d1, d2):
    lo, hi = sorted((d1, d2))
    L = coupled_shear(0.3, 0.2)
    a = pseudo_rotation_polygon(build_graph(L, 1 / 16, lo, mode))
    b = pseudo_rotation_polygon(build_graph(L, 1 / 16, hi, mode))
    assert b.contains_polygon(a)


def test_inner_vertices_certified_by_center_pseudo_orbits():
    L = pinned(0, 1, 2)
    G = build_graph(L, 1 / 32, 0.1, "inner")
    R = pseudo_rotation_set(G)
    for v, edges in R.cycles.items():
        orbit = certificate_orbit(G, edges, repeats=3)
        assert orbit.is_valid(L)
        n = len(orbit.points) - 1
        np.testing.assert_allclose((orbit.points[-1] - orbit.points[0]) / n, v.as_float(), atol=1e-12)


def test_lift_offset_reported():
    L = translation(2.25, -0.75)
    R = pseudo_rotation_set(build_graph(L, 1 / 16, 0.1, "outer"))
    assert R.lift_offset == (2, -1)
    assert hausdorff(R.polygon, convex_hull([(F(9, 4), F(-3, 4))])) <= 0.1 + outer_slack(L, 16)


def test_direction_budget_marks_uncertified():
    R = pseudo_rotation_set(build_graph(coupled_shear(0.3, 0.2), 1 / 16, 0.1, "outer"), budget=5)
    assert not R.certified and R.queries <= 5


def test_scc_with_parallel_edges_matches_networkx_and_keeps_edges():
    import networkx as nx
    G = build_graph(coupled_shear(0.3, 0.2), 1 / 12, 0.1, "outer")
    before = G.dst.copy()
    comp = G.scc_index
    np.testing.assert_array_equal(G.dst, before)
    g = nx.DiGraph()
    g.add_nodes_from(range(G.n_nodes))
    g.add_edges_from((u, v) for u, v, _ in G.edges())
    groups = {frozenset(np.nonzero(comp == c)[0].tolist()) for c in set(comp.tolist())}
    assert groups == {frozenset(c) for c in nx.strongly_connected_components(g)}
