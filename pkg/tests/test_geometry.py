import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kenergy.chern import chern_form
from kenergy.forms import omega_power, wedge
from kenergy.geometry import (
    Manifold,
    NotAdmissibleError,
    best_chart,
    build_grid,
    change_chart,
    from_homogeneous,
    integrate,
    metric_at,
    metric_from_jet,
    positivity_check,
    to_homogeneous,
    volume,
)
from kenergy.jets import Jet4, monomial, squared_norm
from kenergy.oracles import finite_difference_jets
from kenergy.potentials import (
    Constant,
    HarmonicPotential,
    RadialPotential,
    random_potential,
    zonal_basis,
)

# Frozen reference values.  With omega = i ddbar log(1 + |z|^2) the class of
# omega is 2 pi times the hyperplane class h, and int h^n = 1, so V = (2 pi)^n.
V_CP1 = 2 * math.pi
V_CP2 = 4 * math.pi**2
# omega = i dz ^ dzbar = 2 dx ^ dy on C / (Z + iZ)
V_T2 = 2.0


complex_scalars = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def test_cp1_volume_fine_grid():
    grid = build_grid(Manifold("CP1"), (64, 64))
    assert volume(grid) == pytest.approx(V_CP1, abs=1e-10)


def test_cp1_volume_error_does_not_grow_under_refinement():
    errs = [abs(volume(build_grid(Manifold("CP1"), (m, m))) - V_CP1) for m in (4, 8, 16, 32)]
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= max(coarse, 1e-14)
    assert errs[-1] < 1e-13


def test_cp2_volume(cp2_radial, cp2_full):
    assert volume(cp2_radial) == pytest.approx(V_CP2, rel=1e-12)
    assert volume(cp2_full) == pytest.approx(V_CP2, rel=1e-10)


def test_torus_volume_is_exact():
    for m in (4, 7, 24):
        assert volume(build_grid(Manifold("T2"), (m,))) == pytest.approx(V_T2, abs=1e-14)


@pytest.mark.parametrize("kind,res", [("CP1", (2, 8)), ("CP1", (8, 2)), ("CP2", (8, 1, 8)), ("T2", (2,))])
def test_too_small_resolution_is_rejected(kind, res):
    with pytest.raises(ValueError):
        build_grid(Manifold(kind), res)


def test_unknown_manifold():
    with pytest.raises(ValueError):
        Manifold("CP3")


def test_grid_is_deterministic_with_positive_weights():
    a = build_grid(Manifold("CP2"), (6, 4, 5))
    b = build_grid(Manifold("CP2"), (6, 4, 5))
    assert np.all(a.weights > 0)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.weights, b.weights)


def test_every_node_uses_its_largest_homogeneous_coordinate(cp2_full):
    # in the chosen chart all affine coordinates have modulus <= 1
    assert np.all(np.abs(cp2_full.nodes) <= 1 + 1e-12)
    Z = to_homogeneous(cp2_full.points, 0)
    assert np.array_equal(np.argmax(np.abs(Z), axis=-1), cp2_full.charts)


@given(st.lists(complex_scalars, min_size=2, max_size=2), st.integers(0, 2), st.integers(0, 2))
def test_chart_changes_round_trip(w, src, dst):
    w = np.array([w])
    Z = to_homogeneous(w, src)
    if abs(Z[0, dst]) < 1e-3:
        return
    back = change_chart(change_chart(w, src, dst), dst, src)
    assert np.allclose(back, w, atol=1e-9)
    assert np.allclose(from_homogeneous(Z, src), w)


@given(st.lists(complex_scalars, min_size=2, max_size=2))
def test_best_chart_bounds_coordinates(z):
    z = np.array([z])
    chart = best_chart(z)
    w = change_chart(z, 0, int(chart[0])) if chart[0] else z
    assert np.all(np.abs(w) <= 1 + 1e-12)


def test_fs_metric_at_origin():
    m = metric_at(Manifold("CP1"), None, np.zeros((1, 1)))
    assert m.g[0, 0, 0] == pytest.approx(1.0)
    # Ric(omega_FS) = 2 omega_FS on CP^1, so c_1 = omega / pi
    c1 = chern_form(1, m).c[0, 0, 0]
    assert c1 == pytest.approx(1j / math.pi)


def test_constant_potential_does_not_change_metric(rng):
    z = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
    M = Manifold("CP2")
    a = metric_at(M, None, z)
    b = metric_at(M, Constant(2, 3.7).jet(z), z)
    for name in ("g", "dg", "ddg", "R"):
        assert np.allclose(getattr(a, name), getattr(b, name), rtol=1e-13, atol=1e-13)


def test_metric_derivatives_against_finite_difference_oracle():
    # phi = eps (z + zbar) / (1 + |z|^2)
    phi = HarmonicPotential(1, 1, (((1,), (0,), 0.2),))
    M = Manifold("CP1")
    z = np.array([0.3 + 0.1j])

    def total(zz):
        return M.base_potential_value(zz) + phi(zz)

    fd = finite_difference_jets(total, z, 0.05)
    analytic = metric_at(M, phi.jet(z[None]), z[None])
    oracle = metric_from_jet(fd.jet)
    for name in ("g", "dg", "dbg", "ddg"):
        a, b = getattr(analytic, name)[0], getattr(oracle, name)
        assert np.allclose(a, b, rtol=1e-8, atol=1e-8), name


def test_kahler_and_curvature_symmetries(rng):
    phi = random_potential("CP2", rng, 0.1)
    z = 0.6 * (rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2)))
    m = metric_at(Manifold("CP2"), phi.jet(z), z)
    assert np.allclose(m.g, np.conj(np.swapaxes(m.g, -1, -2)), atol=1e-14)
    # d_k g_{i jbar} = d_i g_{k jbar}
    assert np.allclose(m.dg, np.swapaxes(m.dg, -3, -2), atol=1e-13)
    R = m.R
    # R_{i jbar k lbar} = R_{k jbar i lbar} = R_{i lbar k jbar}
    assert np.allclose(R, np.einsum("...ijkl->...kjil", R), atol=1e-12)
    assert np.allclose(R, np.einsum("...ijkl->...ilkj", R), atol=1e-12)
    # conj(R_{i jbar k lbar}) = R_{j ibar l kbar}
    assert np.allclose(np.conj(R), np.einsum("...ijkl->...jilk", R), atol=1e-12)
    assert np.all(m.det_g > 0)


def test_positivity_check(cp1):
    M = Manifold("CP1")
    ok = positivity_check(M, None, cp1)
    assert ok.admissible
    # the FS eigenvalue (1 + |z|^2)^{-2} is smallest in the chart with |z| = 1
    assert ok.min_eigenvalue == pytest.approx(np.min((1 + np.abs(cp1.nodes[:, 0]) ** 2) ** -2))
    mode = zonal_basis(1, (2,))[0]
    assert positivity_check(M, cp1.jet(mode * 0.05), cp1).admissible
    scale = 0.05
    while positivity_check(M, cp1.jet(mode * scale), cp1).admissible:
        scale *= 2
    bad = positivity_check(M, cp1.jet(mode * scale), cp1)
    assert not bad.admissible and bad.min_eigenvalue < 0
    with pytest.raises(NotAdmissibleError):
        metric_from_jet(cp1.base_jet() + cp1.jet(mode * scale), nodes=cp1.points)


def test_integrate_rejects_nan(cp1):
    dens = np.ones(cp1.size)
    dens[3] = np.nan
    with pytest.raises(ValueError):
        integrate(cp1, dens)
    with pytest.raises(ValueError):
        integrate(cp1, np.ones(cp1.size + 1))


def test_chern_numbers(cp1, cp2_radial, cp2_full):
    m1 = metric_from_jet(cp1.base_jet())
    assert integrate(cp1, chern_form(1, m1)) == pytest.approx(2.0, abs=1e-12)
    m2 = metric_from_jet(cp2_radial.base_jet())
    assert integrate(cp2_radial, chern_form(2, m2)) == pytest.approx(3.0, abs=1e-12)
    m3 = metric_from_jet(cp2_full.base_jet())
    assert integrate(cp2_full, chern_form(2, m3)) == pytest.approx(3.0, abs=1e-8)


@pytest.mark.parametrize("k", [1, 2])
def test_chern_integrals_are_cohomological(cp2_full, k):
    rng = np.random.default_rng(k)
    K = cp2_full.base_jet()
    m0 = metric_from_jet(K)
    ref = integrate(cp2_full, wedge(chern_form(k, m0), omega_power(m0, 2 - k)))
    for _ in range(2):
        phi = random_potential("CP2", rng, 0.1)
        m = metric_from_jet(K + cp2_full.jet(phi))
        val = integrate(cp2_full, wedge(chern_form(k, m), omega_power(m, 2 - k)))
        assert val == pytest.approx(ref, rel=1e-6)


# ---------------------------------------------------------------------------
# jets


@given(complex_scalars, complex_scalars)
def test_jet_product_matches_pointwise_product(a, b):
    z = np.array([[0.4 - 0.3j]])
    f = monomial(z, (2,), (1,)) * a + 1.0
    g = squared_norm(z) * b + monomial(z, (0,), (3,))
    h = f * g
    assert np.allclose(h.value, f.value * g.value)
    # Leibniz rule for the first holomorphic derivative
    lhs = h.partial((0,))
    rhs = f.partial((0,)) * g.value + f.value * g.partial((0,))
    assert np.allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) * abs(b)))


@given(st.floats(0.1, 3.0))
def test_jet_log_exp_round_trip(c):
    z = np.array([[0.2 + 0.5j, -0.3j]])
    f = squared_norm(z) + c
    assert np.allclose(f.log().exp().c, f.c, atol=1e-12)
    assert np.allclose((f * f.reciprocal()).c, Jet4.constant(2, 1.0, (1,)).c, atol=1e-12)


def test_jet_of_real_potential_is_conjugation_symmetric(rng):
    phi = random_potential("CP2", rng, 0.3)
    z = rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2))
    j = phi.jet(z)
    assert np.allclose(j.c, j.conj().c, atol=1e-13)
    assert np.allclose(j.partial((0, 1), (1,)), np.conj(j.partial((1,), (0, 1))))
    assert np.allclose(j.partial((0, 1), (1,)), j.partial((1, 0), (1,)))


def test_jet_rejects_orders_above_four():
    j = squared_norm(np.zeros((1, 1)))
    with pytest.raises(ValueError):
        j.partial((0, 0, 0), (0, 0))


@given(st.integers(0, 3), st.floats(-0.4, 0.4))
def test_potential_families_are_smooth_across_charts(power, c):
    # the value in the chart of each node must agree with the value computed in chart 0
    phi = RadialPotential(2, (0.0,) * power + (c,))
    z = np.array([[3.0 + 1j, 0.5], [0.1, 7.0j]])
    charts = best_chart(z)
    for zi, ch in zip(z, charts):
        w = change_chart(zi[None], 0, int(ch))
        assert phi.jet(w, int(ch)).value[0] == pytest.approx(phi(zi[None])[0], abs=1e-12)
