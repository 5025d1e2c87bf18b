"""Donaldson's Lagrangian on the tangent bundle and the second K-energy.

For H_t = g_t (the metrics g_{phi_t} on T'M) and A_t = (d/dt g_t) g_t^{-1},

    L(phi) = int int_0^1 n i Tr(A_t F_t) ^ omega^{n-1} dt - lambda int int_0^1 Tr(A_t) omega^n dt,

with lambda = (2 pi n / r)(1/V) int c_1 ^ omega^{n-1} and r = n.  The
reference form omega is held fixed along the path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chern import PathSpec, bott_chern, chern_form, curvature_form, linear_path, walk
from .forms import FormValue, kahler_form, mixed_sum, omega_power, trace, wedge
from .functionals import k_energy_cor52, k_energy_path, log_volume_ratio, mu_k
from .geometry import QuadratureGrid, integrate, metric_from_jet
from .potentials import Potential


def lambda_const(grid: QuadratureGrid) -> float:
    """(2 pi n / r) (1/V) int c_1 ^ omega^{n-1} for E = T'M (r = n)."""
    n = grid.manifold.n
    r = n
    mp = metric_from_jet(grid.base_jet(), nodes=grid.points)
    vol = integrate(grid, omega_power(mp, n))
    c1 = integrate(grid, wedge(chern_form(1, mp), omega_power(mp, n - 1)))
    return 2 * math.pi * n / r * c1 / vol


@dataclass
class LagrangianResult:
    L: float
    lam: float
    terms: dict
    path: str
    n_t: int
    grid: dict = field(default_factory=dict)


def _traces(sample):
    A = sample.velocity_endomorphism
    F = curvature_form(sample.metric)
    n = A.shape[-1]
    trA = np.trace(A, axis1=-2, axis2=-1)
    trF = trace(F)
    # Tr(A F) = sum_{a,b} A_a^b F_b^a
    trAF = None
    for a in range(n):
        for b in range(n):
            term = F[..., b, a] * A[..., a, b]
            trAF = term if trAF is None else trAF + term
    return trA, trF, trAF


def donaldson_lagrangian(phi: Potential, path: PathSpec | None, grid: QuadratureGrid,
                         lam: float | None = None) -> LagrangianResult:
    """L(g_phi, g) by nested quadrature along ``path`` (linear if None)."""
    n = grid.manifold.n
    path = linear_path(phi) if path is None else path
    lam = lambda_const(grid) if lam is None else lam
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    om_rest = omega_power(m0, n - 1)
    om_top = omega_power(m0, n).top_density()
    first = second = 0.0
    for s in walk(path, grid):
        trA, _, trAF = _traces(s)
        first += s.weight * integrate(grid, wedge(trAF, om_rest) * (n * 1j))
        second += s.weight * integrate(grid, (trA * om_top).real)
    L = first - lam * second
    return LagrangianResult(L, lam, {"trace_curvature": first, "trace": -lam * second},
                            path.kind, path.n_t, grid.describe())


def bc_trace_forms(phi: Potential, path: PathSpec | None, grid: QuadratureGrid):
    """BC_1 = (1/2pi) int Tr(A) dt and BC_2 = (i/(2pi)^2) int (Tr A Tr F - Tr(A F)) dt."""
    n = grid.manifold.n
    path = linear_path(phi) if path is None else path
    bc1 = bc2 = None
    for s in walk(path, grid):
        trA, trF, trAF = _traces(s)
        t1 = FormValue.scalar(n, trA / (2 * math.pi)) * s.weight
        bc1 = t1 if bc1 is None else bc1 + t1
        t2 = (trF * trA - trAF) * (1j / (2 * math.pi) ** 2 * s.weight)
        bc2 = t2 if bc2 is None else bc2 + t2
    return bc1, bc2


def cross_term_path(phi: Potential, path: PathSpec | None, grid: QuadratureGrid) -> float:
    """n i int int_0^1 Tr(A_t) Tr(F_t) ^ omega^{n-1} dt."""
    n = grid.manifold.n
    path = linear_path(phi) if path is None else path
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    om_rest = omega_power(m0, n - 1)
    total = 0.0
    for s in walk(path, grid):
        trA, trF, _ = _traces(s)
        total += s.weight * integrate(grid, wedge(trF * trA, om_rest) * (n * 1j))
    return total


def cross_term_closed(phi: Potential, grid: QuadratureGrid) -> float:
    """n pi int log(omega_phi^n / omega^n) (c_1(phi) + c_1(0)) ^ omega^{n-1}."""
    n = grid.manifold.n
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    m1 = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
    form = wedge(chern_form(1, m1) + chern_form(1, m0), omega_power(m0, n - 1))
    return n * math.pi * integrate(grid, form * log_volume_ratio(m1, m0))


def decomposition(phi: Potential, grid: QuadratureGrid, n_t: int = 16) -> dict:
    """L against -n(2pi)^2 int BC_2 ^ omega^{n-1} - (2pi)^2 mu_1 int BC_1 omega^n + cross term."""
    n = grid.manifold.n
    path = linear_path(phi, n_t)
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    mu1 = mu_k(1, grid)
    lag = donaldson_lagrangian(phi, path, grid, lam=2 * math.pi * mu1)
    bc1 = bott_chern(1, path, grid)
    bc2 = bott_chern(2, path, grid) if n >= 2 else None
    t_bc2 = (-n * (2 * math.pi) ** 2 * integrate(grid, wedge(bc2, omega_power(m0, n - 1)))
             if bc2 is not None else 0.0)
    t_bc1 = -(2 * math.pi) ** 2 * mu1 * integrate(grid, wedge(bc1, omega_power(m0, n)))
    cross = cross_term_path(phi, path, grid)
    return {"L": lag.L, "bc2_term": t_bc2, "bc1_term": t_bc1, "cross_term": cross,
            "cross_term_closed": cross_term_closed(phi, grid),
            "recombined": t_bc2 + t_bc1 + cross}


COEFFICIENTS = {"printed": lambda n: (n - 1) / (n + 2), "derived": lambda n: (n - 1) / (n + 1)}


@dataclass
class SecondEnergyReport:
    lhs_path: float
    lhs_cor52: float
    rhs: dict
    differences: dict
    adjudicated: str
    terms: dict
    lam: float
    mu1: float


def theorem3_rhs_terms(phi: Potential, grid: QuadratureGrid, n_t: int = 16) -> dict:
    n = grid.manifold.n
    if n < 2:
        raise ValueError("the second K-energy needs complex dimension >= 2")
    m0 = metric_from_jet(grid.base_jet(), nodes=grid.points)
    m1 = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
    om0, om1 = kahler_form(m0.g), kahler_form(m1.g)
    mu1, mu2 = mu_k(1, grid), mu_k(2, grid)
    lag = donaldson_lagrangian(phi, linear_path(phi, n_t), grid)
    logr = log_volume_ratio(m1, m0)
    bracket = (om0 * (2 * mu1) - chern_form(1, m1) * n - chern_form(1, m0) * n)
    log_term = -1 / (4 * math.pi * n) * integrate(grid, wedge(bracket, omega_power(m0, n - 1)) * logr)
    pv = grid.values(phi)
    c2_part = integrate(grid, wedge(chern_form(2, m1), mixed_sum(om0, om1, n - 2)) * pv)
    vol_part = mu2 * integrate(grid, mixed_sum(om0, om1, n) * pv)
    return {"lagrangian": -lag.L / ((2 * math.pi) ** 2 * n), "log": log_term,
            "c2_part": c2_part, "mu2_volume_part": vol_part, "L": lag.L, "lambda": lag.lam,
            "mu1": mu1}


def theorem3_check(phi: Potential, grid: QuadratureGrid, n_t: int = 16) -> SecondEnergyReport:
    """Evaluate both readings of the mu_2 coefficient against the path-integral M_2."""
    n = grid.manifold.n
    terms = theorem3_rhs_terms(phi, grid, n_t)
    lhs_path = k_energy_path(2, linear_path(phi, n_t), grid).value
    lhs_cor = k_energy_cor52(2, phi, grid, n_t=n_t).value
    rhs, diff = {}, {}
    for name, coef in COEFFICIENTS.items():
        rhs[name] = (terms["lagrangian"] + terms["log"] - terms["c2_part"]
                     + coef(n) * terms["mu2_volume_part"])
        diff[name] = rhs[name] - lhs_path
    adjudicated = min(diff, key=lambda k: abs(diff[k]))
    return SecondEnergyReport(lhs_path, lhs_cor, rhs, diff, adjudicated, terms,
                          terms["lambda"], terms["mu1"])
