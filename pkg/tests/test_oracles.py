import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kenergy.checks import jet_families
from kenergy.geometry import Manifold
from kenergy.jets import _table
from kenergy.oracles import (
    FiniteDifferenceWarning,
    cohomology_reference,
    finite_difference_jets,
)
from kenergy.potentials import Constant, RadialPotential


def test_reference_tables():
    cp1 = cohomology_reference("CP1")
    assert cp1.volume == pytest.approx(2 * math.pi)
    assert cp1.chern_numbers[1] == pytest.approx(2.0)
    assert cp1.mu[1] == pytest.approx(1 / math.pi)
    assert cp1.lam == pytest.approx(2.0)
    cp2 = cohomology_reference("CP2")
    assert cp2.volume == pytest.approx(4 * math.pi**2)
    assert cp2.chern_numbers[1:] == pytest.approx((6 * math.pi, 3.0))
    assert cp2.mu[1:] == pytest.approx((3 / (2 * math.pi), 3 / (4 * math.pi**2)))
    assert cp2.lam == pytest.approx(3.0)
    assert cp2.euler == 3
    t2 = cohomology_reference("T2")
    assert t2.volume == 2.0 and t2.euler == 0 and t2.mu[1] == 0.0 and t2.lam == 0.0
    with pytest.raises(ValueError):
        cohomology_reference("CP3")


@pytest.mark.parametrize("kind", ["CP1", "CP2", "T2"])
def test_reference_tables_are_consistent(kind):
    ref = cohomology_reference(kind)
    for k in range(ref.n + 1):
        assert ref.mu[k] * ref.volume == pytest.approx(ref.chern_numbers[k])
    assert ref.chern_numbers[ref.n] == pytest.approx(ref.euler)
    d = ref.as_dict()
    assert set(d) == {"manifold", "V", "chi", "int_ck_omega", "mu", "lambda"}


def _errors_by_order(analytic, fd, n):
    degree = _table(n)[2]
    a = analytic.c.reshape(len(degree))
    err = np.abs(a - fd.c) / np.maximum(1.0, np.abs(a))
    return {d: float(err[degree == d].max()) for d in np.unique(degree)}


def test_fubini_study_jets_against_oracle():
    M = Manifold("CP1")
    z = np.array([0.3 + 0.1j])
    analytic = M.base_potential(z[None])
    fd = finite_difference_jets(M.base_potential_value, z, 0.05)
    errs = _errors_by_order(analytic, fd.jet, 1)
    assert max(errs[d] for d in (0, 1, 2)) <= 1e-8
    assert max(errs[d] for d in (3, 4)) <= 1e-6
    assert not fd.unstable


def test_constant_has_zero_derivatives():
    fd = finite_difference_jets(lambda z: np.full(len(z), 2.5), np.array([0.1j, 0.2]), 0.05)
    assert fd.jet.c[0] == pytest.approx(2.5)
    # round-off of fourth differences at h = 0.05 is of order 2.5 eps / h^4
    assert np.max(np.abs(fd.jet.c[1:])) < 1e-8


def test_quadratic_on_the_torus():
    # |z|^2: d dbar = 1, every other derivative of order >= 2 vanishes (fourth
    # differences at h = 0.05 carry round-off of order eps / h^4 ~ 1e-10)
    fd = finite_difference_jets(lambda z: np.abs(z[:, 0]) ** 2, np.array([0.3 - 0.2j]), 0.05)
    j = fd.jet
    assert j.partial((0,), (0,)) == pytest.approx(1.0, abs=1e-10)
    assert abs(j.partial((0, 0), ())) < 1e-10
    assert abs(j.partial((0, 0), (0,))) < 1e-10
    assert abs(j.partial((0, 0), (0, 0))) < 1e-8


def test_step_outside_stable_range():
    with pytest.raises(ValueError):
        finite_difference_jets(lambda z: z.real[:, 0], np.array([0.0]), 1e-5)
    with pytest.raises(ValueError):
        finite_difference_jets(lambda z: z.real[:, 0], np.array([0.0]), 1.0)


def test_instability_is_flagged():
    # a rapidly oscillating function cannot be resolved at h = 0.4
    with warnings.catch_warnings():
        warnings.simplefilter("error", FiniteDifferenceWarning)
        with pytest.raises(FiniteDifferenceWarning):
            finite_difference_jets(lambda z: np.sin(40 * z.real[:, 0]), np.array([0.1]), 0.4)


@pytest.mark.parametrize("kind", ["CP1", "CP2", "T2"])
def test_family_jets_on_random_nodes(kind):
    rng = np.random.default_rng(17)
    n = Manifold(kind).n
    for name, (jet, value, h) in jet_families(kind).items():
        worst = 0.0
        for _ in range(20 if n == 1 else 6):
            z = rng.uniform(-0.8, 0.8, n) + 1j * rng.uniform(-0.8, 0.8, n)
            analytic = jet(z[None, :]).take(0)
            fd = finite_difference_jets(lambda zz: np.real(value(zz)), z, h)
            err = np.abs(analytic.c - fd.jet.c) / np.maximum(1.0, np.abs(analytic.c))
            worst = max(worst, float(err.max()))
        assert worst <= 1e-6, name


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_radial_profiles_against_oracle(a, b):
    phi = RadialPotential(1, (0.0, a, b))
    z = np.array([0.25 - 0.4j])
    fd = finite_difference_jets(phi, z, 0.05)
    analytic = phi.jet(z[None]).take(0)
    assert np.allclose(analytic.c, fd.jet.c, atol=1e-7)


def test_constant_potential_jet_is_constant():
    j = Constant(2, 1.5).jet(np.zeros((3, 2)))
    assert np.all(j.c[0] == 1.5) and np.all(j.c[1:] == 0)
