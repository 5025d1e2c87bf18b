"""Chern-Weil forms c_k and Bott-Chern transgressions BC_k along paths.

For the tangent bundle with metric H = g_phi the curvature endomorphism is
F = dbar((d H) H^{-1}), with components (F_a^b)_{k lbar} = R_{a qbar k lbar} g^{qbar b},
and

    c_k = (1/k!) (i/2pi)^k sum_{pi in S_k} sgn(pi) F_{a_pi(1)}^{a_1} ^ ... ^ F_{a_pi(k)}^{a_k}.

The same antisymmetrised sum with the first slot replaced by the
endomorphism A = (dH/dt) H^{-1} gives the Bott-Chern integrand

    BC_k = -k i int_0^1 Phi_k(A_t, F_t, ..., F_t) dt.

The permutation sum is evaluated literally; with n <= 2 that is at most
two permutations over four index tuples.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .forms import FormValue, kahler_form, wedge
from .geometry import MetricPoint, QuadratureGrid, integrate, metric_from_jet
from .jets import Jet4
from .potentials import Combination, Potential


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def curvature_form(metric: MetricPoint) -> FormValue:
    """Endomorphism-valued (1,1)-form F with batch axes (..., a, b) holding F_a^b."""
    return FormValue.from_11(metric.endomorphism_curvature)


def endomorphism_form(A: np.ndarray) -> FormValue:
    """Endomorphism-valued 0-form with batch axes (..., a, b)."""
    n = A.shape[-1]
    return FormValue(n, 0, 0, np.asarray(A)[None, None])


def polarized(k: int, first: FormValue, F: FormValue, order: Sequence[int] | None = None) -> FormValue:
    """(1/k!) (i/2pi)^k sum_pi sgn(pi) X1[a_pi(1), a_1] ^ F[a_pi(2), a_2] ^ ... .

    ``order`` permutes the positions of the k factors before wedging; for
    even-degree factors the result must not depend on it.
    """
    r = F.batch_shape[-1]
    factors = [first] + [F] * (k - 1)
    order = list(range(k)) if order is None else list(order)
    out = None
    for perm in itertools.permutations(range(k)):
        sign = _perm_sign(perm)
        for alphas in itertools.product(range(r), repeat=k):
            pieces = [factors[m][..., alphas[perm[m]], alphas[m]] for m in range(k)]
            term = pieces[order[0]]
            for m in order[1:]:
                term = wedge(term, pieces[m])
            term = term * sign
            out = term if out is None else out + term
    return out * ((1j / (2 * math.pi)) ** k / math.factorial(k))


def chern_form(k: int, metric: MetricPoint, order: Sequence[int] | None = None) -> FormValue:
    """Chern-Weil representative c_k(g) as a (k, k)-form at every node."""
    n = metric.n
    if not 0 <= k <= n:
        raise ValueError(f"k = {k} out of range 0..{n}")
    if k == 0:
        return FormValue.scalar(n, np.ones(metric.det_g.shape))
    F = curvature_form(metric)
    return polarized(k, F, F, order)


def first_chern_from_det(K: Jet4) -> FormValue:
    """(i/2pi)(-ddbar log det g): c_1 computed from the determinant alone.

    Uses d_k dbar_l log det g = g^{ji} d_k dbar_l g_{ij} - g^{ji} d_k g_{iq} g^{qp} dbar_l g_{pj}.
    """
    mp = metric_from_jet(K, check=False)
    t1 = np.einsum("...ji,...klij->...kl", mp.g_inv, mp.ddg)
    t2 = np.einsum("...ji,...kiq,...qp,...lpj->...kl", mp.g_inv, mp.dg, mp.g_inv, mp.dbg)
    return FormValue.from_11(-(1j / (2 * math.pi)) * (t1 - t2))


def ddbar(jet: Jet4) -> np.ndarray:
    """Matrix d_k dbar_l f at each node."""
    n = jet.n
    out = np.empty(jet.batch_shape + (n, n), dtype=complex)
    for k in range(n):
        for l in range(n):
            out[..., k, l] = jet.partial((k,), (l,))
    return out


def i_ddbar(jet: Jet4) -> FormValue:
    """The (1,1)-form i ddbar f."""
    return FormValue.from_11(1j * ddbar(jet))


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class PathSpec:
    """t -> phi_t = sum_j coef_j(t) terms_j, with the exact t-derivative.

    ``n_t`` Gauss-Legendre nodes are used for t-integrals over [0, 1].
    """

    kind: str
    terms: tuple
    coef: Callable[[float], Sequence[float]]
    dcoef: Callable[[float], Sequence[float]]
    n_t: int = 16

    def potential(self, t: float) -> Potential:
        return _combine(self.terms, self.coef(t))

    def velocity(self, t: float) -> Potential:
        return _combine(self.terms, self.dcoef(t))

    def jets(self, t: float, grid: QuadratureGrid) -> tuple[Jet4, Jet4]:
        return (_combine_jets(self.terms, self.coef(t), grid),
                _combine_jets(self.terms, self.dcoef(t), grid))

    def with_nodes(self, n_t: int) -> "PathSpec":
        return PathSpec(self.kind, self.terms, self.coef, self.dcoef, n_t)


def _combine(terms, coefs) -> Combination:
    n = terms[0].n
    out = Combination(n)
    for p, c in zip(terms, coefs):
        out = out + float(c) * p
    return out


def _combine_jets(terms, coefs, grid) -> Jet4:
    out = Jet4.constant(grid.manifold.n, 0.0, (grid.size,))
    for p, c in zip(terms, coefs):
        if c != 0.0:
            out = out + grid.jet(p) * float(c)
    return out


def linear_path(phi: Potential, n_t: int = 16) -> PathSpec:
    return PathSpec("linear", (phi,), lambda t: (t,), lambda t: (1.0,), n_t)


def reparametrized_path(phi: Potential, power: float = 2.0, n_t: int = 16) -> PathSpec:
    """phi_t = s(t) phi with s(t) = t^power."""
    return PathSpec(f"reparam{power:g}", (phi,), lambda t: (t**power,),
                    lambda t: (power * t ** (power - 1),), n_t)


def smoothstep_path(phi: Potential, n_t: int = 16) -> PathSpec:
    return PathSpec("smoothstep", (phi,), lambda t: (3 * t**2 - 2 * t**3,),
                    lambda t: (6 * t - 6 * t**2,), n_t)


def bent_path(phi: Potential, psi: Potential, n_t: int = 16) -> PathSpec:
    """phi_t = t phi + t (1 - t) psi: same endpoints, different route."""
    return PathSpec("bent", (phi, psi), lambda t: (t, t * (1 - t)),
                    lambda t: (1.0, 1 - 2 * t), n_t)


def constant_path(phi: Potential, n_t: int = 16) -> PathSpec:
    return PathSpec("constant", (phi,), lambda t: (1.0,), lambda t: (0.0,), n_t)


def segment_path(phi0: Potential, phi1: Potential, n_t: int = 16) -> PathSpec:
    """phi_t = (1 - t) phi0 + t phi1."""
    return PathSpec("segment", (phi0, phi1), lambda t: (1 - t, t), lambda t: (-1.0, 1.0), n_t)


def loop_path(base: Potential, a: Potential, b: Potential, n_t: int = 32) -> PathSpec:
    """Closed loop phi_t = base + sin(2 pi t) a + (1 - cos(2 pi t)) b."""
    tp = 2 * math.pi
    return PathSpec(
        "loop", (base, a, b),
        lambda t: (1.0, math.sin(tp * t), 1 - math.cos(tp * t)),
        lambda t: (0.0, tp * math.cos(tp * t), tp * math.sin(tp * t)),
        n_t,
    )


def t_nodes(n_t: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n_t)
    return 0.5 * (x + 1), 0.5 * w


@dataclass
class PathSample:
    t: float
    weight: float
    phi: Jet4
    phidot: Jet4
    metric: MetricPoint

    @property
    def velocity_endomorphism(self) -> np.ndarray:
        """A = (d/dt g) g^{-1} with A[..., a, b] = gdot_{a cbar} g^{cbar b}."""
        return ddbar(self.phidot) @ self.metric.g_inv


def walk(path: PathSpec, grid: QuadratureGrid, base: Jet4 | None = None) -> Iterator[PathSample]:
    """Metric data at the Gauss-Legendre t-nodes of ``path``."""
    K0 = grid.base_jet() if base is None else base
    ts, ws = t_nodes(path.n_t)
    for t, w in zip(ts, ws):
        phi, phidot = path.jets(float(t), grid)
        mp = metric_from_jet(K0 + phi, nodes=grid.points)
        yield PathSample(float(t), float(w), phi, phidot, mp)


def sample_at(path: PathSpec, t: float, grid: QuadratureGrid, base: Jet4 | None = None) -> PathSample:
    K0 = grid.base_jet() if base is None else base
    phi, phidot = path.jets(float(t), grid)
    return PathSample(float(t), 1.0, phi, phidot, metric_from_jet(K0 + phi, nodes=grid.points))


def bott_chern_integrand(k: int, sample: PathSample) -> FormValue:
    """-k i Phi_k(A_t, F_t, ..., F_t): the t-derivative of BC_k along the path."""
    F = curvature_form(sample.metric)
    A = endomorphism_form(sample.velocity_endomorphism)
    return polarized(k, A, F) * (-k * 1j)


def bott_chern(k: int, path: PathSpec, grid: QuadratureGrid, base: Jet4 | None = None) -> FormValue:
    """Pointwise representative of BC_k(phi_1, phi_0) along ``path``."""
    if k < 1:
        raise ValueError("Bott-Chern forms are defined for k >= 1")
    out = None
    for s in walk(path, grid, base):
        term = bott_chern_integrand(k, s) * s.weight
        out = term if out is None else out + term
    return out


def transgression_pairings(k: int, phi: Potential, grid: QuadratureGrid,
                           tests: Sequence[Potential], n_t: int = 16):
    """Both sides of int h (c_k(phi) - c_k(0)) ^ omega^{n-k} = int BC_k ^ (-i ddbar h) ^ omega^{n-k}."""
    n = grid.manifold.n
    base = grid.base_jet()
    m0 = metric_from_jet(base)
    m1 = metric_from_jet(base + grid.jet(phi), nodes=grid.points)
    om = kahler_form(m0.g)
    om_rest = FormValue.scalar(n, np.ones(grid.size))
    for _ in range(n - k):
        om_rest = wedge(om_rest, om)
    dc = wedge(chern_form(k, m1) - chern_form(k, m0), om_rest)
    bc = bott_chern(k, linear_path(phi, n_t), grid)
    out = []
    for h in tests:
        hj = grid.jet(h)
        lhs = integrate(grid, dc * hj.value)
        rhs = integrate(grid, wedge(wedge(bc, i_ddbar(hj) * -1.0), om_rest))
        out.append((lhs, rhs))
    return out


def transgression_residual(k: int, phi: Potential, grid: QuadratureGrid,
                           tests: Sequence[Potential] | None = None, n_t: int = 16) -> float:
    """max over the test battery of the defect in the transgression identity."""
    if tests is None:
        from .potentials import potential_battery

        tests = potential_battery(grid)
    pairs = transgression_pairings(k, phi, grid, tests, n_t)
    return max(abs(a - b) for a, b in pairs)
