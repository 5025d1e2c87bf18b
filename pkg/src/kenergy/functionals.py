"""The k-th K-energy functional and the identities it satisfies.

    M_k(phi) = -(n-k+1) int_0^1 int_M phidot (c_k(phi_t) - mu_k omega_t^k) ^ omega_t^{n-k} dt

is evaluated directly along a path, and in the two path-free forms that
replace the t-integral by a Bott-Chern form.  ``base`` arguments shift the
reference metric to omega' = omega + i ddbar(base), which is what the
cocycle identity needs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chern import (
    PathSpec,
    bott_chern,
    bott_chern_integrand,
    chern_form,
    linear_path,
    sample_at,
    walk,
)
from .forms import kahler_form, mixed_sum, omega_power, power_of, wedge
from .geometry import (
    MetricPoint,
    NotAdmissibleError,
    QuadratureGrid,
    integrate,
    metric_from_jet,
)
from .jets import Jet4
from .potentials import Combination, Potential


@dataclass
class KEnergyResult:
    value: float
    k: int
    method: str
    mu: float
    n_t: int | None = None
    path: str | None = None
    grid: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


def base_jet(grid: QuadratureGrid, base: Potential | None = None) -> Jet4:
    K = grid.base_jet()
    if base is not None:
        K = K + grid.jet(base)
    return K


def _check_k(k: int, n: int):
    if not 0 <= k <= n:
        raise ValueError(f"k = {k} out of range 0..{n}")


def mu_k(k: int, grid: QuadratureGrid, base: Potential | None = None) -> float:
    """(1/V) int c_k(omega) ^ omega^{n-k}."""
    n = grid.manifold.n
    _check_k(k, n)
    mp = metric_from_jet(base_jet(grid, base), nodes=grid.points)
    vol = integrate(grid, omega_power(mp, n))
    return integrate(grid, wedge(chern_form(k, mp), omega_power(mp, n - k))) / vol


def euler_density(k: int, mp: MetricPoint, mu: float) -> np.ndarray:
    """Top density of (c_k - mu omega^k) ^ omega^{n-k} for the metric ``mp``."""
    n = mp.n
    return (wedge(chern_form(k, mp), omega_power(mp, n - k)).top_density()
            - mu * omega_power(mp, n).top_density())


def k_energy_path(k: int, path: PathSpec, grid: QuadratureGrid,
                  base: Potential | None = None, mu: float | None = None) -> KEnergyResult:
    """M_k by nested quadrature along ``path`` (which must start at 0)."""
    n = grid.manifold.n
    _check_k(k, n)
    mu = mu_k(k, grid, base) if mu is None else mu
    K0 = base_jet(grid, base)
    total = 0.0
    for s in walk(path, grid, K0):
        dens = euler_density(k, s.metric, mu)
        total += s.weight * integrate(grid, s.phidot.value.real * dens)
    value = -(n - k + 1) * total
    return KEnergyResult(value, k, "path", mu, path.n_t, path.kind, grid.describe())


def k_energy_path_multi(ks: Sequence[int], path: PathSpec, grid: QuadratureGrid,
                        base: Potential | None = None) -> dict:
    """k_energy_path for several k sharing one walk along the path."""
    n = grid.manifold.n
    for k in ks:
        _check_k(k, n)
    mus = {k: mu_k(k, grid, base) for k in ks}
    K0 = base_jet(grid, base)
    totals = {k: 0.0 for k in ks}
    for s in walk(path, grid, K0):
        phidot = s.phidot.value.real
        for k in ks:
            totals[k] += s.weight * integrate(grid, phidot * euler_density(k, s.metric, mus[k]))
    return {k: KEnergyResult(-(n - k + 1) * totals[k], k, "path", mus[k], path.n_t, path.kind,
                             grid.describe()) for k in ks}


def k_energy(k: int, phi: Potential, grid: QuadratureGrid, method: str = "lemma51",
             base: Potential | None = None, mu: float | None = None, n_t: int = 16) -> KEnergyResult:
    if method == "path":
        return k_energy_path(k, linear_path(phi, n_t), grid, base, mu)
    if method == "lemma51":
        return k_energy_lemma51(k, phi, grid, base, mu, n_t)
    if method == "cor52":
        return k_energy_cor52(k, phi, grid, base, mu, n_t)
    if method == "nopath":
        if k != 1:
            raise ValueError("the closed no-path formula is specific to k = 1")
        return k_energy_nopath(phi, grid, base, mu)
    raise ValueError(f"unknown method {method!r}")


def _closed_form_pieces(k, phi, grid, base, mu, n_t):
    n = grid.manifold.n
    _check_k(k, n)
    if k < 1:
        raise ValueError("closed formulas need k >= 1")
    mu = mu_k(k, grid, base) if mu is None else mu
    K0 = base_jet(grid, base)
    pj = grid.jet(phi)
    m0 = metric_from_jet(K0, nodes=grid.points)
    m1 = metric_from_jet(K0 + pj, nodes=grid.points)
    bc = bott_chern(k, linear_path(phi, n_t), grid, K0)
    om0, om1 = kahler_form(m0.g), kahler_form(m1.g)
    full = mixed_sum(om0, om1, n)
    weight = (n - k + 1) / (n + 1)
    volume_term = weight * mu * integrate(grid, full * pj.value.real)
    return mu, m0, m1, bc, om0, om1, pj, volume_term


def k_energy_lemma51(k: int, phi: Potential, grid: QuadratureGrid, base: Potential | None = None,
                     mu: float | None = None, n_t: int = 16) -> KEnergyResult:
    """int BC_k(phi,0) ^ omega_phi^{n-k+1} - int phi (c_k(0) ^ S_{n-k} - w mu_k S_n)."""
    n = grid.manifold.n
    mu, m0, m1, bc, om0, om1, pj, vterm = _closed_form_pieces(k, phi, grid, base, mu, n_t)
    t1 = integrate(grid, wedge(bc, power_of(om1, n - k + 1)))
    t2 = integrate(grid, wedge(chern_form(k, m0), mixed_sum(om0, om1, n - k)) * pj.value.real)
    value = t1 - t2 + vterm
    return KEnergyResult(value, k, "lemma51", mu, n_t, "linear", grid.describe(),
                         {"bott_chern": t1, "chern": -t2, "volume": vterm})


def k_energy_cor52(k: int, phi: Potential, grid: QuadratureGrid, base: Potential | None = None,
                   mu: float | None = None, n_t: int = 16) -> KEnergyResult:
    """int BC_k(phi,0) ^ omega^{n-k+1} - int phi (c_k(phi) ^ S_{n-k} - w mu_k S_n)."""
    n = grid.manifold.n
    mu, m0, m1, bc, om0, om1, pj, vterm = _closed_form_pieces(k, phi, grid, base, mu, n_t)
    t1 = integrate(grid, wedge(bc, power_of(om0, n - k + 1)))
    t2 = integrate(grid, wedge(chern_form(k, m1), mixed_sum(om0, om1, n - k)) * pj.value.real)
    value = t1 - t2 + vterm
    return KEnergyResult(value, k, "cor52", mu, n_t, "linear", grid.describe(),
                         {"bott_chern": t1, "chern": -t2, "volume": vterm})


def log_volume_ratio(m1: MetricPoint, m0: MetricPoint) -> np.ndarray:
    """log(omega_phi^n / omega^n) = log(det g_phi / det g)."""
    return np.log(m1.det_g / m0.det_g)


def k_energy_nopath(phi: Potential, grid: QuadratureGrid, base: Potential | None = None,
                    mu: float | None = None, volume_coefficient: float | None = None) -> KEnergyResult:
    """Path-free M_1 built from (1/2pi) log(omega_phi^n / omega^n):

        int (1/2pi) log(omega_phi^n/omega^n) omega_phi^n
          - int phi ( c_1(omega) ^ S_{n-1} - a mu_1 S_n ),   S_m = sum_i omega^i ^ omega_phi^{m-i}

    with a single outer phi-integral.  The default a = n/(n+1) is the k = 1
    case of the general closed formula; a = 1/(n+1) coincides with it only
    on curves and can be passed explicitly for comparison.
    """
    n = grid.manifold.n
    mu = mu_k(1, grid, base) if mu is None else mu
    a = n / (n + 1) if volume_coefficient is None else volume_coefficient
    K0 = base_jet(grid, base)
    pj = grid.jet(phi)
    m0 = metric_from_jet(K0, nodes=grid.points)
    m1 = metric_from_jet(K0 + pj, nodes=grid.points)
    om0, om1 = kahler_form(m0.g), kahler_form(m1.g)
    ent = integrate(grid, power_of(om1, n) * (log_volume_ratio(m1, m0) / (2 * math.pi)))
    ric = integrate(grid, wedge(chern_form(1, m0), mixed_sum(om0, om1, n - 1)) * pj.value.real)
    vol = a * mu * integrate(grid, mixed_sum(om0, om1, n) * pj.value.real)
    return KEnergyResult(ent - ric + vol, 1, "nopath", mu, None, None, grid.describe(),
                         {"entropy": ent, "ricci": -ric, "volume": vol, "volume_coefficient": a})


def cocycle_defect(k: int, phi: Potential, psi: Potential, grid: QuadratureGrid,
                   method: str = "path", n_t: int = 16) -> float:
    """M_{k,omega}(phi) - M_{k,omega'}(phi - psi) - M_{k,omega}(psi), omega' = omega_psi."""
    mu = mu_k(k, grid)
    a = k_energy(k, phi, grid, method, mu=mu, n_t=n_t).value
    b = k_energy(k, Combination.of(phi) - psi, grid, method, base=psi, mu=mu, n_t=n_t).value
    c = k_energy(k, psi, grid, method, mu=mu, n_t=n_t).value
    return a - b - c


@dataclass
class LoopReport:
    loop_integral: float
    fixed_form_integral: float
    bc_derivative: dict


def loop_defect(k: int, loop: PathSpec, grid: QuadratureGrid, sample_ts: Sequence[float] = (0.37,),
                lam: float | None = None, mu: float | None = None) -> LoopReport:
    """Around a closed loop: the K-energy path integral, the fixed-form
    integral int phidot (c_k(phi_0) - lam omega_t^k) ^ omega_t^{n-k}, and the
    quantity int d/dt BC_k(phi_t, phi_0) ^ omega_t^{n-k+1} at ``sample_ts``."""
    n = grid.manifold.n
    _check_k(k, n)
    if k < 1:
        raise ValueError("loop checks need k >= 1")
    mu = mu_k(k, grid) if mu is None else mu
    lam = mu if lam is None else lam
    K0 = grid.base_jet()
    start = sample_at(loop, 0.0, grid, K0)
    ck0 = chern_form(k, start.metric)
    total = 0.0
    fixed = 0.0
    for s in walk(loop, grid, K0):
        phidot = s.phidot.value.real
        total += s.weight * integrate(grid, phidot * euler_density(k, s.metric, mu))
        fixed_dens = (wedge(ck0, omega_power(s.metric, n - k)).top_density()
                      - lam * omega_power(s.metric, n).top_density())
        fixed += s.weight * integrate(grid, phidot * fixed_dens)
    bcd = {}
    for t in sample_ts:
        s = sample_at(loop, t, grid, K0)
        bcd[float(t)] = integrate(grid, wedge(bott_chern_integrand(k, s),
                                              omega_power(s.metric, n - k + 1)), real=False)
    return LoopReport(-(n - k + 1) * total, fixed, bcd)


def bc_derivative_pairing(k: int, path: PathSpec, t: float, grid: QuadratureGrid) -> complex:
    """int (d/dt) BC_k(phi_t, phi_0) ^ omega_t^{n-k+1} at time t."""
    n = grid.manifold.n
    s = sample_at(path, t, grid)
    return integrate(grid, wedge(bott_chern_integrand(k, s), omega_power(s.metric, n - k + 1)),
                     real=False)


def critical_residual(k: int, phi: Potential | None, grid: QuadratureGrid,
                      mu: float | None = None) -> float:
    """L^2(omega_phi) norm of Lambda^k c_k(phi) - mu_k, normalised by the volume."""
    n = grid.manifold.n
    _check_k(k, n)
    mu = mu_k(k, grid) if mu is None else mu
    K = grid.base_jet() + (grid.jet(phi) if phi is not None else 0.0)
    mp = metric_from_jet(K, nodes=grid.points)
    vol = omega_power(mp, n).top_density()
    ratio = wedge(chern_form(k, mp), omega_power(mp, n - k)).top_density() / vol - mu
    return math.sqrt(integrate(grid, ratio**2 * vol) / integrate(grid, vol))


# ---------------------------------------------------------------------------
# descent in coefficient space


def _family(basis: Sequence[Potential], coeffs) -> Combination:
    out = Combination(basis[0].n)
    for b, c in zip(basis, coeffs):
        out = out + float(c) * b
    return out


def coefficient_gradient(k: int, basis: Sequence[Potential], coeffs, grid: QuadratureGrid,
                         mu: float | None = None) -> np.ndarray:
    """dM_k/dc_j = -(n-k+1) int chi_j (c_k - mu_k omega_phi^k) ^ omega_phi^{n-k}."""
    n = grid.manifold.n
    mu = mu_k(k, grid) if mu is None else mu
    phi = _family(basis, coeffs)
    mp = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
    dens = euler_density(k, mp, mu)
    return np.array([-(n - k + 1) * integrate(grid, grid.jet(b).value.real * dens) for b in basis])


def finite_difference_gradient(k: int, basis: Sequence[Potential], coeffs, grid: QuadratureGrid,
                               h: float = 1e-4, mu: float | None = None, n_t: int = 24) -> np.ndarray:
    mu = mu_k(k, grid) if mu is None else mu
    coeffs = np.asarray(coeffs, dtype=float)
    out = []
    for j in range(len(basis)):
        e = np.zeros_like(coeffs)
        e[j] = h
        vals = [k_energy_lemma51(k, _family(basis, coeffs + s * e), grid, mu=mu, n_t=n_t).value
                for s in (2, 1, -1, -2)]
        out.append((-vals[0] + 8 * vals[1] - 8 * vals[2] + vals[3]) / (12 * h))
    return np.array(out)


@dataclass
class DescentStep:
    step: int
    energy: float
    residual: float
    step_size: float
    coeffs: list


@dataclass
class Trajectory:
    k: int
    steps: list
    converged: bool
    message: str

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.steps])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([s.residual for s in self.steps])


def descend(k: int, basis: Sequence[Potential], initial, grid: QuadratureGrid, steps: int = 200,
            step_size: float = 1.0, tol: float = 1e-4, armijo: float = 1e-4,
            n_t: int = 16, min_step: float = 1e-10) -> Trajectory:
    """Gradient descent on M_k over span(basis) with backtracking line search.

    The search direction is the L^2(omega_phi^n) projection of the first
    variation onto the family, i.e. -G^{-1} grad with G the Gram matrix of
    the basis.  Non-admissible trial points are treated as failed steps.
    """
    mu = mu_k(k, grid)
    n = grid.manifold.n
    c = np.asarray(initial, dtype=float).copy()

    def energy(cv):
        return k_energy_lemma51(k, _family(basis, cv), grid, mu=mu, n_t=n_t).value

    try:
        e = energy(c)
    except NotAdmissibleError as exc:
        raise NotAdmissibleError(f"initial potential is not admissible: {exc}") from exc
    res = critical_residual(k, _family(basis, c), grid, mu)
    traj = [DescentStep(0, e, res, 0.0, c.tolist())]
    if res <= tol:
        return Trajectory(k, traj, True, "initial point already critical")
    alpha = step_size
    for it in range(1, steps + 1):
        phi = _family(basis, c)
        mp = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
        vol = omega_power(mp, n).top_density()
        vals = np.array([grid.jet(b).value.real for b in basis])
        gram = np.array([[integrate(grid, vi * vj * vol) for vj in vals] for vi in vals])
        dens = euler_density(k, mp, mu)
        grad = np.array([-(n - k + 1) * integrate(grid, v * dens) for v in vals])
        direction = -np.linalg.solve(gram, grad)
        slope = float(grad @ direction)
        accepted = False
        while alpha > min_step:
            trial = c + alpha * direction
            try:
                et = energy(trial)
            except NotAdmissibleError:
                alpha *= 0.5
                continue
            if et <= e + armijo * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return Trajectory(k, traj, False, "line search failed")
        c, e = trial, et
        res = critical_residual(k, _family(basis, c), grid, mu)
        traj.append(DescentStep(it, e, res, alpha, c.tolist()))
        if res <= tol:
            return Trajectory(k, traj, True, f"residual {res:.2e} <= {tol:g}")
        alpha = min(step_size, 2 * alpha)
    return Trajectory(k, traj, False, "step budget exhausted")
