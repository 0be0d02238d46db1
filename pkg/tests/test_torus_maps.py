import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotaset.torus_maps import (CallableMap, PseudoOrbit, canonicalize, compose_rotation,
                                coupled_shear, eval_lift, grid_map, identity, load_map_config,
                                make_family, map_from_config, map_to_config, osc, pinned, shear,
                                translation, verify_lift)
from rotaset.estimation import lebesgue_rotation_vector

FAMILIES = {
    "translation": translation(0.3, 0.1),
    "shear": shear(0.3),
    "coupled_shear": coupled_shear(0.3, 0.2),
    "pinned": pinned(0, 1, 2),
}

coords = st.floats(-50, 50, allow_nan=False)
shifts = st.integers(-1000, 1000)


def test_translation_lift():
    np.testing.assert_array_equal(eval_lift(translation(0.25, -0.5), (1.0, 2.0)), (1.25, 1.5))


def test_shear_lift_at_quarter():
    np.testing.assert_allclose(eval_lift(shear(0.3), (0.0, 0.25)), (0.3, 0.25), atol=1e-15)


def test_batch_and_single_agree():
    L = coupled_shear(0.3, 0.2)
    Z = np.random.default_rng(1).random((50, 2)) * 10 - 5
    B = L(Z)
    for z, b in zip(Z, B):
        np.testing.assert_array_equal(L(z), b)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_equivariance_example(name):
    L = FAMILIES[name]
    z = np.array([0.137, 0.829])
    d = L(z + np.array([5.0, -3.0])) - L(z)
    np.testing.assert_allclose(d, (5.0, -3.0), atol=1e-12)


@pytest.mark.parametrize("name", sorted(FAMILIES))
@given(x=coords, y=coords, m=shifts, n=shifts)
def test_equivariance_property(name, x, y, m, n):
    L = FAMILIES[name]
    z = np.array([x, y])
    shift = np.array([float(m), float(n)])
    # phi is evaluated on z mod 1, so the displacement agrees up to the
    # rounding of the reduction itself
    np.testing.assert_allclose(L.phi(z + shift), L.phi(z), atol=1e-9)


@pytest.mark.parametrize("name", ["translation", "shear", "coupled_shear", "pinned"])
def test_modulus_of_continuity_holds(name):
    L = FAMILIES[name]
    rng = np.random.default_rng(7)
    Z = rng.random((2000, 2))
    dZ = rng.normal(size=(2000, 2)) * 10.0 ** rng.uniform(-6, -1, size=(2000, 1))
    lhs = np.hypot(*(L(Z + dZ) - L(Z)).T)
    t = np.hypot(*dZ.T)
    assert np.all(lhs <= t + L.omega(t) + 1e-12)


# --- osc -----------------------------------------------------------------

def test_osc_translation_zero():
    r = osc(translation(0.3, 0.1))
    assert r.grid_value == 0.0 and r.certified_bound == 0.0


def test_osc_shear():
    r = osc(shear(0.3))
    assert r.grid_value == pytest.approx(0.6, abs=1e-12)
    assert r.certified_bound >= 0.6


def test_osc_coupled_shear_converges():
    target = math.hypot(0.6, 0.4)
    L = coupled_shear(0.3, 0.2)
    prev_gap = None
    for M in (32, 64, 128, 256):
        r = osc(L, resolution=M)
        assert r.grid_value <= target + 1e-12
        assert r.certified_bound >= target
        assert target - r.grid_value <= 2 * L.phi_modulus(math.sqrt(2) / (2 * M)) + 1e-12
        gap = r.certified_bound - r.grid_value
        if prev_gap is not None:
            assert gap <= prev_gap
        prev_gap = gap
    assert osc(L, resolution=512).grid_value == pytest.approx(target, abs=1e-4)


def test_osc_invariant_under_rotation():
    L = coupled_shear(0.3, 0.2)
    a, b = osc(L), osc(compose_rotation(L, (0.37, -1.2)))
    assert a.grid_value == pytest.approx(b.grid_value, abs=1e-12)
    assert a.certified_bound == pytest.approx(b.certified_bound, abs=1e-12)


# --- compose_rotation ----------------------------------------------------

def test_compose_rotation_of_identity_is_translation():
    L = compose_rotation(identity(), (0.5, 0.0))
    Z = np.random.default_rng(3).random((20, 2))
    np.testing.assert_array_equal(L(Z), translation(0.5, 0.0)(Z))


@given(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.tuples(st.floats(-2, 2), st.floats(-2, 2)))
def test_compose_rotation_additive(u, v):
    L = shear(0.3)
    A = compose_rotation(compose_rotation(L, u), v)
    B = compose_rotation(L, (u[0] + v[0], u[1] + v[1]))
    Z = np.array([[0.1, 0.7], [0.4, 0.2], [3.3, -1.9]])
    np.testing.assert_allclose(A(Z), B(Z), rtol=0, atol=1e-12)


def test_lebesgue_vector_shifts_by_rotation():
    L = shear(0.3)
    v = (0.25, -0.125)
    a = lebesgue_rotation_vector(L, 64).vector
    b = lebesgue_rotation_vector(compose_rotation(L, v), 64).vector
    np.testing.assert_allclose(np.subtract(b, a), v, atol=1e-15)


def test_canonicalize_offset():
    L = compose_rotation(translation(0.3, 0.1), (2.0, -1.0))
    C, m = canonicalize(L)
    assert m == (2, -1)
    np.testing.assert_allclose(C.phi((0.0, 0.0)), (0.3, 0.1), atol=1e-12)


# --- pseudo-orbits -------------------------------------------------------

def test_pseudo_orbit_validation():
    L = shear(0.3)
    pts = [np.array([0.1, 0.2])]
    for _ in range(10):
        pts.append(L(pts[-1]))
    assert PseudoOrbit(np.array(pts), 0.0).is_valid(L)
    noisy = np.array(pts) + np.r_[[[0, 0]], np.full((10, 2), 0.03)]
    assert PseudoOrbit(noisy, 0.1).is_valid(L)
    assert not PseudoOrbit(noisy, 0.01).is_valid(L)


# --- verify_lift ---------------------------------------------------------

def test_verify_identity_passes():
    r = verify_lift(identity())
    assert r.passed
    assert r.periodicity_defect == 0.0 and r.folded_cells == 0 and r.collisions == 0
    assert r.area_defect < 1e-6  # shoelace round-off on squares of side 1/256


def test_verify_reports_non_periodic_field():
    L = CallableMap(lip_phi=0.2, lip_lift=1.2, fn=lambda z: np.stack([0.2 * z[:, 0], 0 * z[:, 0]], 1))
    r = verify_lift(L)
    assert r.periodicity_defect > 0.1
    assert not r.passed
    assert any("periodic" in n for n in r.notes)


def test_verify_strong_shear_is_injective():
    r = verify_lift(shear(10.0), resolution=16)
    assert r.folded_cells == 0 and r.collisions == 0
    assert r.degree == pytest.approx(1.0)
    assert any("oscillation" in n for n in r.notes)


def test_verify_rejects_non_finite():
    L = CallableMap(lip_phi=0, lip_lift=1, fn=lambda z: np.full_like(z, np.nan))
    with pytest.raises(ValueError):
        verify_lift(L)


def test_verify_folding_map_reported():
    # x -> x + 0.3 sin(2 pi x) has negative derivative somewhere
    L = CallableMap(lip_phi=2, lip_lift=3,
                    fn=lambda z: np.stack([0.3 * np.sin(2 * np.pi * z[:, 0]), 0 * z[:, 0]], 1))
    r = verify_lift(L)
    assert r.folded_cells > 0 and not r.passed


def test_verify_pinned_and_coupled_pass():
    for L in (pinned(0, 2, 5), coupled_shear(0.3, 0.2)):
        assert verify_lift(L).passed


# --- grid maps and configs ----------------------------------------------

def test_grid_map_reproduces_samples_and_interpolates():
    N = 16
    s = np.arange(N) / N
    X, Y = np.meshgrid(s, s)
    data = np.stack([0.1 * np.sin(2 * np.pi * Y), 0.05 * np.cos(2 * np.pi * X)], axis=2)
    G = grid_map(data)
    nodes = np.stack([X.ravel(), Y.ravel()], 1)
    np.testing.assert_allclose(G.phi(nodes), data.reshape(-1, 2), atol=1e-15)
    mid = np.array([[0.5 / N, 0.0]])
    np.testing.assert_allclose(G.phi(mid)[0], (data[0, 0] + data[0, 1]) / 2, atol=1e-15)
    Z = np.random.default_rng(0).random((500, 2))
    dZ = np.random.default_rng(1).normal(size=(500, 2)) * 1e-3
    assert np.all(np.hypot(*(G(Z + dZ) - G(Z)).T) <= np.hypot(*dZ.T) + G.omega(np.hypot(*dZ.T)) + 1e-12)


def test_grid_map_rejects_bad_shape():
    with pytest.raises(ValueError):
        grid_map(np.zeros((4, 5, 2)))


def test_family_config_roundtrip(tmp_path):
    L = compose_rotation(coupled_shear(0.3, 0.2, a=0.1), (0.5, 0.0))
    cfg = map_to_config(L)
    p = tmp_path / "m.json"
    p.write_text(json.dumps(cfg))
    M = load_map_config(p)
    Z = np.random.default_rng(2).random((10, 2))
    np.testing.assert_array_equal(M(Z), L(Z))
    assert M.conservative


def test_grid_config_from_binary(tmp_path):
    N = 8
    data = np.random.default_rng(5).normal(scale=0.01, size=(N, N, 2)).astype("<f4")
    data.tofile(tmp_path / "field.bin")
    (tmp_path / "g.json").write_text(json.dumps({"family": "grid", "resolution": N, "data": "field.bin"}))
    G = load_map_config(tmp_path / "g.json")
    np.testing.assert_allclose(G.phi(np.zeros(2)), data[0, 0], atol=1e-7)


def test_unknown_family_and_missing_params():
    with pytest.raises(ValueError):
        map_from_config({"family": "nope"})
    with pytest.raises(ValueError, match="missing"):
        make_family("shear")
    with pytest.raises(ValueError):
        pinned(0, 1, 2, c=1.5)
