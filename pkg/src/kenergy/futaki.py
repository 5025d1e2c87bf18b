"""Higher Futaki invariants, holomorphy potentials and flow-induced paths.

Holomorphic fields on CP^n are induced by matrices A in gl(n+1, C),
X = sum_i (A Z)_i d/dZ_i, written in the chart Z_j = 1 as

    X(w_m) = (A Z)_{i(m)} - w_m (A Z)_j ,

and their real flows are Phi_t = [exp(t A)].  On the torus the library
fields are the constant fields b d/dz.

With i_X omega = alpha - dbar theta_X the invariant is evaluated as

    F_k(X) = -(n-k+1) i int theta_X (c_k - H c_k) ^ omega^{n-k}

and, on CP^1 for radial metrics, independently from F_1 = int X(f) omega_phi
with i ddbar f = c_1 - mu_1 omega_phi solved as an ODE in u = |z|^2/(1+|z|^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .chern import chern_form, ddbar
from .forms import FormValue, omega_power, wedge
from .functionals import euler_density, k_energy_lemma51, mu_k
from .geometry import (
    MetricPoint,
    QuadratureGrid,
    integrate,
    metric_from_jet,
    to_homogeneous,
)
from .jets import Jet4
from .potentials import (
    Combination,
    HermitianRatioPotential,
    Potential,
    PullbackFSPotential,
    RadialPotential,
    fourier_basis,
    harmonic_basis,
    u_jet,
)


class BasisTooSmallError(RuntimeError):
    """The Galerkin basis cannot represent theta_X to the requested tolerance."""


class UnsupportedManifoldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class HolomorphicField:
    """Holomorphic vector field induced by A (CP^n) or the constant field b d/dz (torus)."""

    n: int
    A: np.ndarray | None = None
    b: complex | None = None
    name: str = "X"

    @property
    def on_torus(self) -> bool:
        return self.A is None

    def components(self, nodes: np.ndarray, chart: int = 0) -> np.ndarray:
        """X^m at ``nodes`` (shape (N, n)) in the chart Z_chart = 1."""
        nodes = np.asarray(nodes, dtype=complex)
        if self.on_torus:
            return np.full(nodes.shape, complex(self.b))
        Z = to_homogeneous(nodes, chart)
        AZ = Z @ np.asarray(self.A, dtype=complex).T
        own = np.delete(AZ, chart, axis=-1)
        return own - nodes * AZ[..., chart : chart + 1]

    def jacobian(self, nodes: np.ndarray, chart: int = 0) -> np.ndarray:
        """d X^m / d w_i with axes (..., i, m)."""
        nodes = np.asarray(nodes, dtype=complex)
        n = self.n
        out = np.zeros(nodes.shape[:-1] + (n, n), dtype=complex)
        if self.on_torus:
            return out
        A = np.asarray(self.A, dtype=complex)
        Z = to_homogeneous(nodes, chart)
        AZ = Z @ A.T
        hom = [i for i in range(n + 1) if i != chart]
        for i in range(n):
            # dZ/dw_i is the unit vector at homogeneous slot hom[i]
            dAZ = A[:, hom[i]]
            for m in range(n):
                val = dAZ[hom[m]] - nodes[..., m] * dAZ[chart]
                if m == i:
                    val = val - AZ[..., chart]
                out[..., i, m] = val
        return out

    def flow_matrix(self, t: float) -> np.ndarray:
        if self.on_torus:
            raise UnsupportedManifoldError("torus flows are translations; no matrix form")
        return scipy.linalg.expm(t * np.asarray(self.A, dtype=complex))

    def flow(self, z: np.ndarray, t: float) -> np.ndarray:
        """Phi_t on chart-0 points (flow of X_R = X + Xbar)."""
        z = np.asarray(z, dtype=complex)
        if self.on_torus:
            return z + t * complex(self.b)
        Z = to_homogeneous(z, 0) @ self.flow_matrix(t).T
        return Z[..., 1:] / Z[..., :1]

    def conjugate(self) -> "HolomorphicField":
        if self.on_torus:
            return HolomorphicField(self.n, None, np.conj(self.b), self.name + "_conj")
        return HolomorphicField(self.n, np.conj(self.A), None, self.name + "_conj")

    def scaled(self, c: complex) -> "HolomorphicField":
        if self.on_torus:
            return HolomorphicField(self.n, None, c * self.b, f"{c}*{self.name}")
        return HolomorphicField(self.n, c * np.asarray(self.A), None, f"{c}*{self.name}")

    def __add__(self, other: "HolomorphicField") -> "HolomorphicField":
        if self.on_torus:
            return HolomorphicField(self.n, None, self.b + other.b, f"{self.name}+{other.name}")
        return HolomorphicField(self.n, np.asarray(self.A) + np.asarray(other.A), None,
                                f"{self.name}+{other.name}")


def euler_field(n: int) -> HolomorphicField:
    """z d/dz on CP^1, sum_j z_j d/dz_j on CP^n."""
    return HolomorphicField(n, np.diag([0.0] + [1.0] * n).astype(complex), name="euler")


def rotation_field(n: int) -> HolomorphicField:
    """i z d/dz: its real flow is a rotation, an isometry of Fubini-Study."""
    return HolomorphicField(n, 1j * np.diag([0.0] + [1.0] * n), name="rotation")


def coordinate_field(n: int, j: int) -> HolomorphicField:
    """z_j d/dz_j (1-based j)."""
    A = np.zeros((n + 1, n + 1), dtype=complex)
    A[j, j] = 1.0
    return HolomorphicField(n, A, name=f"z{j}d{j}")


def translation_field(n: int, j: int = 1) -> HolomorphicField:
    """d/dz_j in the chart Z_0 = 1 (a projective vector field)."""
    A = np.zeros((n + 1, n + 1), dtype=complex)
    A[j, 0] = 1.0
    return HolomorphicField(n, A, name=f"d{j}")


def torus_field(b: complex = 1.0) -> HolomorphicField:
    return HolomorphicField(1, None, complex(b), name="translation")


def field_library(kind: str) -> dict:
    if kind == "T2":
        return {"translation": torus_field(1.0), "translation_i": torus_field(1j)}
    n = 2 if kind == "CP2" else 1
    lib = {"euler": euler_field(n), "rotation": rotation_field(n), "translation": translation_field(n)}
    if n == 2:
        lib["z1d1"] = coordinate_field(2, 1)
    return lib


def xbar_holomorphy_check(X: HolomorphicField, nodes: np.ndarray, chart: int = 0, h: float = 1e-4) -> float:
    """max |dbar X^m| by central differences in zbar (should vanish)."""
    nodes = np.asarray(nodes, dtype=complex)
    worst = 0.0
    for l in range(X.n):
        e = np.zeros(X.n, dtype=complex)
        e[l] = 1.0
        # d/dzbar = (d/dx + i d/dy) / 2
        dx = (X.components(nodes + h * e, chart) - X.components(nodes - h * e, chart)) / (2 * h)
        dy = (X.components(nodes + 1j * h * e, chart) - X.components(nodes - 1j * h * e, chart)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(0.5 * (dx + 1j * dy)))))
    return worst


# ---------------------------------------------------------------------------
# holomorphy potentials


def _chartwise(grid: QuadratureGrid, fn) -> np.ndarray:
    """Stack ``fn(nodes, chart)`` over the chart groups of the grid."""
    out = None
    for j, idx in grid.chart_groups():
        part = fn(grid.nodes[idx], j)
        if out is None:
            out = np.zeros((grid.size,) + part.shape[1:], dtype=part.dtype)
        out[idx] = part
    return out


def field_components(X: HolomorphicField, grid: QuadratureGrid) -> np.ndarray:
    return _chartwise(grid, X.components)


def field_jacobian(X: HolomorphicField, grid: QuadratureGrid) -> np.ndarray:
    return _chartwise(grid, X.jacobian)


def apply_field(X: HolomorphicField, jet: Jet4, grid: QuadratureGrid) -> tuple[np.ndarray, np.ndarray]:
    """Values of X(f) = X^k d_k f and of dbar_l X(f) = X^k d_k dbar_l f."""
    Xc = field_components(X, grid)
    n = grid.manifold.n
    value = sum(Xc[:, k] * jet.partial((k,), ()) for k in range(n))
    dbar = np.stack([sum(Xc[:, k] * jet.partial((k,), (l,)) for k in range(n)) for l in range(n)], -1)
    return value, dbar


def _dbar_of(jet: Jet4) -> np.ndarray:
    return np.stack([jet.partial((), (l,)) for l in range(jet.n)], -1)


@dataclass
class HolomorphyPotential:
    """theta_X at the nodes with i_X omega = alpha - dbar theta_X."""

    theta: np.ndarray
    dbar_theta: np.ndarray
    alpha: np.ndarray
    residual: float
    basis_size: int
    field: HolomorphicField = None


def _metric_terms(phi: Potential | None) -> list:
    if phi is None:
        return []
    if isinstance(phi, Combination):
        return [t for t, a in zip(phi.terms, phi.coefs) if a != 0.0]
    return [phi]


def _default_basis(grid: QuadratureGrid) -> list:
    kind = grid.manifold.kind
    if kind == "T2":
        return fourier_basis(2)
    return harmonic_basis(grid.manifold.n, 1)


def solve_theta(X: HolomorphicField, phi: Potential | None, grid: QuadratureGrid,
                basis: Sequence[Potential] | None = None, tol: float = 1e-7,
                metric: MetricPoint | None = None) -> HolomorphyPotential:
    """Galerkin least squares for theta_X on the metric omega + i ddbar phi.

    Minimises || i_X omega_phi + dbar theta - alpha ||_{L^2(omega_phi)} over
    theta in span(basis + {X(phi_j)}), the second group being the Lie
    derivatives of the terms of phi; alpha = 0 on CP^n and a constant
    (0,1)-form on the torus.  theta is normalised to mean zero.
    """
    n = grid.manifold.n
    if metric is None:
        metric = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
    basis = _default_basis(grid) if basis is None else list(basis)
    Xc = field_components(X, grid)
    # (i_X omega)_lbar = i X^k g_{k lbar}
    target = 1j * np.einsum("...k,...kl->...l", Xc, metric.g)
    vals, cols = [], []
    for b in basis:
        j = grid.jet(b)
        vals.append(j.value)
        cols.append(_dbar_of(j))
    for term in _metric_terms(phi):
        v, d = apply_field(X, grid.jet(term), grid)
        vals.append(v)
        cols.append(d)
    n_theta = len(cols)
    if grid.manifold.kind == "T2":
        e = np.zeros((grid.size, n), dtype=complex)
        e[:, 0] = -1.0  # the unknown alpha enters as -alpha
        cols.append(e)
        vals.append(np.zeros(grid.size, dtype=complex))
    vol = omega_power(metric, n).top_density()
    # pointwise norm |beta|^2 = beta^* g^{-1} beta; whiten with the Cholesky factor
    L = np.linalg.cholesky(metric.g_inv)
    sq = np.sqrt(grid.weights * vol)[:, None]

    def whiten(b):
        return sq * np.einsum("...lk,...l->...k", L.conj(), b)

    Amat = np.stack([whiten(c).reshape(-1) for c in cols], -1)
    rhs = -whiten(target).reshape(-1)
    scale = np.linalg.norm(Amat, axis=0)
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(Amat / scale, rhs, rcond=1e-12)
    coef = coef / scale
    theta = sum(c * v for c, v in zip(coef[:n_theta], vals[:n_theta]))
    dbar_theta = sum(c * d for c, d in zip(coef[:n_theta], cols[:n_theta]))
    alpha = np.zeros(n, dtype=complex)
    if grid.manifold.kind == "T2":
        alpha[0] = coef[-1]
    V = integrate(grid, vol)
    theta = theta - integrate(grid, theta * vol, real=False) / V
    resid = target + dbar_theta - alpha
    num = integrate(grid, np.einsum("...l,...lk,...k->...", resid.conj(), metric.g_inv.swapaxes(-1, -2), resid).real * vol)
    den = integrate(grid, np.einsum("...l,...lk,...k->...", target.conj(), metric.g_inv.swapaxes(-1, -2), target).real * vol)
    rel = math.sqrt(max(num, 0.0) / den) if den > 0 else math.sqrt(max(num, 0.0))
    if rel > tol:
        raise BasisTooSmallError(f"holomorphy potential residual {rel:.3e} exceeds {tol:g}; enlarge the basis")
    return HolomorphyPotential(theta, dbar_theta, alpha, rel, n_theta, X)


def fubini_study_theta(X: HolomorphicField, z: np.ndarray) -> np.ndarray:
    """Closed form theta_X = -i Z^* A Z / |Z|^2 + const for omega_FS (chart-0 points)."""
    Z = to_homogeneous(z, 0)
    num = np.einsum("...i,ij,...j->...", Z.conj(), np.asarray(X.A, dtype=complex), Z)
    return -1j * num / np.sum(np.abs(Z) ** 2, -1)


# ---------------------------------------------------------------------------
# invariants


def harmonic_part(k: int, metric: MetricPoint, grid: QuadratureGrid, mu: float | None = None) -> FormValue:
    """H c_k for the metric: mu_k omega^k when dim H^{k,k} = 1 or k = n; zero-class on the torus."""
    kind = grid.manifold.kind
    if kind not in ("CP1", "CP2", "T2"):
        raise UnsupportedManifoldError(kind)
    if kind == "T2" and k not in (0, 1):
        raise UnsupportedManifoldError("k out of range on the torus")
    mu = mu_k(k, grid) if mu is None else mu
    return omega_power(metric, k) * mu


def futaki(k: int, X: HolomorphicField, phi: Potential | None, grid: QuadratureGrid,
           theta: HolomorphyPotential | None = None, theta_shift: complex = 0.0,
           mu: float | None = None) -> complex:
    """-(n-k+1) i int theta_X (c_k - H c_k) ^ omega_phi^{n-k} for omega_phi = omega + i ddbar phi."""
    n = grid.manifold.n
    mp = metric_from_jet(grid.base_jet() + grid.jet(phi), nodes=grid.points)
    if theta is None:
        theta = solve_theta(X, phi, grid, metric=mp)
    mu = mu_k(k, grid) if mu is None else mu
    defect = wedge(chern_form(k, mp) - harmonic_part(k, mp, grid, mu), omega_power(mp, n - k))
    dens = defect.top_density_complex()
    return -(n - k + 1) * 1j * integrate(grid, (theta.theta + theta_shift) * dens, real=False)


# -- the defining formula on CP^1 --------------------------------------------


def _radial_points(u: np.ndarray):
    """Chart nodes on the positive real ray with the given u, near-origin chart chosen."""
    u = np.asarray(u, dtype=float)
    outer = u > 0.5
    x = np.where(outer, np.sqrt((1 - u) / np.where(outer, u, 1.0)), np.sqrt(u / np.where(outer, 1.0, 1 - u)))
    return x.astype(complex).reshape(-1, 1), outer


def _rho_at(phi: Potential | None, u: np.ndarray, mu: float) -> np.ndarray:
    """Ratio (c_1(omega_phi) - mu omega_phi) / omega_FS at points with the given u."""
    z, outer = _radial_points(u)
    out = np.empty(len(u))
    for chart, mask in ((0, ~outer), (1, outer)):
        if not np.any(mask):
            continue
        nodes = z[mask]
        fs = (Jet4.coordinate(nodes, 0) * Jet4.coordinate(nodes, 0, conjugate=True) + 1.0).log()
        K = fs + (phi.jet(nodes, chart) if phi is not None else 0.0)
        mp = metric_from_jet(K)
        m0 = metric_from_jet(fs)
        dens = euler_density(1, mp, mu)
        out[mask] = dens / omega_power(m0, 1).top_density()
    return out


@dataclass
class FkSolution:
    """Radial f_1 with i ddbar f = c_1 - mu_1 omega_phi, through f'(u) at nodes."""

    fprime: np.ndarray
    total_rho: float
    residual: float


def solve_fk_radial(phi: RadialPotential | None, grid: QuadratureGrid, mu: float | None = None,
                    n_gl: int = 40) -> FkSolution:
    """(u(1-u) f')' = rho(u), integrated from the nearer pole: Q(u) = int_0^u rho."""
    if grid.manifold.kind != "CP1":
        raise UnsupportedManifoldError("the radial f_k solver is specific to CP^1")
    if phi is not None and not _is_radial(phi):
        raise UnsupportedManifoldError("futaki_via_fk needs a radial metric potential")
    mu = mu_k(1, grid) if mu is None else mu
    uj = grid.assemble(u_jet)
    u = uj.value.real
    one_minus = 1.0 - u
    for j, idx in grid.chart_groups():
        if j == 1:  # 1 - u = |w|^2 / (1 + |w|^2) without cancellation
            s = np.abs(grid.nodes[idx, 0]) ** 2
            one_minus[idx] = s / (1 + s)
    x, w = np.polynomial.legendre.leggauss(n_gl)
    x, w = 0.5 * (x + 1), 0.5 * w
    Q = np.empty_like(u)
    lower = u <= 0.5
    # Q(u) = int_0^u rho for u <= 1/2, -int_u^1 rho above (Q(1) = 0 up to quadrature)
    pts = np.where(lower[:, None], u[:, None] * x[None], 1 - one_minus[:, None] * x[None])
    lens = np.where(lower, u, one_minus)
    rho = _rho_at(phi, pts.reshape(-1), mu).reshape(pts.shape)
    Q = np.where(lower, 1.0, -1.0) * lens * (rho @ w)
    fprime = Q / (u * one_minus)
    total = float(np.sum(_rho_at(phi, x, mu) * w))
    # independent check: f = -(log(det g_phi / det g_FS) + 2 phi) / 2pi, f'(u) = d_z f / d_z u
    mp = metric_from_jet(grid.base_jet() + grid.jet(phi))
    m0 = metric_from_jet(grid.base_jet())
    dlogdet = np.einsum("...ij,...kji->...k", mp.g_inv, mp.dg)[:, 0] - \
        np.einsum("...ij,...kji->...k", m0.g_inv, m0.dg)[:, 0]
    dphi = grid.jet(phi).partial((0,), ()) if phi is not None else 0.0
    closed = -(dlogdet + 2 * dphi) / (2 * math.pi) / uj.partial((0,), ())
    residual = float(np.max(np.abs(fprime - closed.real)) / max(1.0, np.max(np.abs(closed))))
    return FkSolution(fprime, total, residual)


def _is_radial(phi) -> bool:
    if isinstance(phi, RadialPotential):
        return True
    if isinstance(phi, Combination):
        return all(_is_radial(t) for t in phi.terms)
    return False


def futaki_via_fk(k: int, X: HolomorphicField, phi: RadialPotential | None, grid: QuadratureGrid,
                  mu: float | None = None) -> complex:
    """int L_X f_1 ^ omega_phi = int f'(u) X(u) omega_phi on CP^1 (radial metrics)."""
    if k != 1 or grid.manifold.kind != "CP1":
        raise UnsupportedManifoldError("the defining formula is implemented for k = 1 on CP^1")
    sol = solve_fk_radial(phi, grid, mu)
    uj = grid.assemble(u_jet)
    Xu, _ = apply_field(X, uj, grid)
    mp = metric_from_jet(grid.base_jet() + grid.jet(phi))
    vol = omega_power(mp, 1).top_density()
    return integrate(grid, sol.fprime * Xu * vol, real=False)


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True, eq=False)
class FlowPotential(Potential):
    """phi_t with Phi_t^* omega = omega + i ddbar phi_t for omega = omega_FS + i ddbar psi.

    phi_t = log(|M Z|^2/|Z|^2) + psi o Phi_t - psi + c, M = exp(t A); psi radial or None.
    """

    n: int
    M: np.ndarray
    psi: RadialPotential | None = None
    c: float = 0.0

    def _u_pulled(self, nodes, chart):
        P = np.diag([0.0] + [1.0] * self.n)
        return HermitianRatioPotential(self.n, P, self.M).jet(nodes, chart)

    def jet(self, nodes, chart=0):
        out = PullbackFSPotential(self.n, self.M).jet(nodes, chart) + self.c
        if self.psi is not None:
            ut = self._u_pulled(nodes, chart)
            out = out + ut.compose(self.psi.profile_derivs(ut.value.real)) - self.psi.jet(nodes, chart)
        return out

    def __call__(self, z):
        out = PullbackFSPotential(self.n, self.M)(z) + self.c
        if self.psi is not None:
            P = np.diag([0.0] + [1.0] * self.n)
            ut = HermitianRatioPotential(self.n, P, self.M)(z)
            out = out + np.polynomial.Polynomial(self.psi.coeffs)(ut) - self.psi(z)
        return out


@dataclass(frozen=True, eq=False)
class FlowVelocity(Potential):
    """d/dt phi_t along the flow, before mean normalisation."""

    n: int
    A: np.ndarray
    M: np.ndarray
    psi: RadialPotential | None = None
    c: float = 0.0

    def _parts(self, nodes, chart):
        A = np.asarray(self.A, dtype=complex)
        P = np.diag([0.0] + [1.0] * self.n).astype(complex)
        R = lambda H: HermitianRatioPotential(self.n, H, self.M).jet(nodes, chart)
        fs = R(A + A.conj().T)
        if self.psi is None:
            return fs
        ut = R(P)
        dut = R(A.conj().T @ P + P @ A) - ut * R(A + A.conj().T)
        d1 = self.psi.profile_derivs(ut.value.real)[1:]
        dpsi = ut.compose(list(d1) + [_poly_deriv(self.psi, 5, ut.value.real)])
        return fs + dpsi * dut

    def jet(self, nodes, chart=0):
        return self._parts(nodes, chart) + self.c

    def __call__(self, z):
        A = np.asarray(self.A, dtype=complex)
        out = HermitianRatioPotential(self.n, A + A.conj().T, self.M)(z) + self.c
        if self.psi is not None:
            P = np.diag([0.0] + [1.0] * self.n).astype(complex)
            R = lambda H: HermitianRatioPotential(self.n, H, self.M)(z)
            ut = R(P)
            dut = R(A.conj().T @ P + P @ A) - ut * R(A + A.conj().T)
            out = out + np.polynomial.Polynomial(self.psi.coeffs).deriv()(ut) * dut
        return out


def _poly_deriv(psi: RadialPotential, m: int, u):
    return np.polynomial.Polynomial(psi.coeffs).deriv(m)(u)


class FlowPath:
    """PathSpec-compatible path t -> phi_{tT} along the flow of X_R, normalised by int phi_t omega^n = 0.

    t in [0, 1] is rescaled to flow time tT; velocities carry the factor T.
    """

    kind = "flow"

    def __init__(self, X: HolomorphicField, T: float, grid: QuadratureGrid,
                 psi: RadialPotential | None = None, n_t: int = 16):
        if X.on_torus:
            raise UnsupportedManifoldError("flow families are built for projective fields")
        if psi is not None and not isinstance(psi, RadialPotential):
            raise UnsupportedManifoldError("perturbed bases must be radial potentials")
        self.X, self.T, self.grid, self.psi, self.n_t = X, float(T), grid, psi, n_t
        self.n = grid.manifold.n
        K0 = grid.base_jet() + grid.jet(psi)
        self._vol = omega_power(metric_from_jet(K0), self.n).top_density()
        self._V = integrate(grid, self._vol)

    def with_nodes(self, n_t: int) -> "FlowPath":
        return FlowPath(self.X, self.T, self.grid, self.psi, n_t)

    def _raw(self, tau: float):
        M = self.X.flow_matrix(tau)
        return FlowPotential(self.n, M, self.psi), FlowVelocity(self.n, self.X.A, M, self.psi)

    def _mean(self, pot) -> float:
        return integrate(self.grid, self.grid.assemble(pot.jet).value.real * self._vol) / self._V

    def at_time(self, tau: float) -> tuple[Potential, Potential]:
        """(phi_tau, d phi / d tau) as potentials, both with the normalisation applied."""
        phi, vel = self._raw(tau)
        phi = FlowPotential(self.n, phi.M, self.psi, -self._mean(phi))
        vel = FlowVelocity(self.n, self.X.A, vel.M, self.psi, -self._mean(vel))
        return phi, vel

    def potential(self, t: float) -> Potential:
        return self.at_time(t * self.T)[0]

    def velocity(self, t: float) -> Potential:
        return self.at_time(t * self.T)[1] * self.T

    def jets(self, t: float, grid: QuadratureGrid):
        phi, vel = self.at_time(t * self.T)
        return grid.assemble(phi.jet), grid.assemble(vel.jet) * self.T


def flow_family(X: HolomorphicField, T: float, grid: QuadratureGrid,
                psi: RadialPotential | None = None, n_t: int = 16) -> FlowPath:
    return FlowPath(X, T, grid, psi, n_t)


def lie_derivative_residual(path: FlowPath, tau: float) -> float:
    """max |L_{X_R} g_t - ddbar phidot_t| / max |g_t| over the grid (chart coordinates)."""
    grid = path.grid
    phi, vel = path.at_time(tau)
    K = grid.base_jet() + grid.jet(path.psi) + grid.assemble(phi.jet)
    mp = metric_from_jet(K)
    Xc = field_components(path.X, grid)
    J = field_jacobian(path.X, grid)  # J[..., i, m] = d_i X^m
    g = mp.g
    lie = (np.einsum("...k,...kij->...ij", Xc, mp.dg)
           + np.einsum("...k,...kij->...ij", Xc.conj(), mp.dbg)
           + np.einsum("...im,...mj->...ij", J, g)
           + np.einsum("...jm,...im->...ij", J.conj(), g))
    target = ddbar(grid.assemble(vel.jet))
    return float(np.max(np.abs(lie - target)) / np.max(np.abs(g)))


def velocity_transport_defect(path: FlowPath, tau: float) -> tuple[float, float]:
    """phidot_tau - Phi_tau^* phidot_0 at the nodes: (spread after removing the mean, mean offset)."""
    grid = path.grid
    _, v0 = path.at_time(0.0)
    _, vt = path.at_time(tau)
    pts = grid.points
    moved = path.X.flow(pts, tau)
    diff = vt(pts) - v0(moved)
    diff = np.asarray(diff, dtype=float)
    return float(np.max(np.abs(diff - diff.mean())) if diff.size else 0.0), float(diff.mean())


@dataclass
class FlowInvarianceReport:
    k: int
    field: str
    T: float
    times: list
    sup_phi: float
    dM_dt_direct: list
    dM_dt_fd: list
    re_futaki: list
    futaki_values: list
    max_abs_dMdt: float
    max_metric_dependence: float
    lie_residual: float
    extra: dict = field(default_factory=dict)


def theorem2_check(k: int, X: HolomorphicField, T: float, grid: QuadratureGrid,
                   psi: RadialPotential | None = None, times: Sequence[float] = (0.0, 0.25, 0.5),
                   h: float = 1e-3) -> FlowInvarianceReport:
    """d/dt M_k(phi_t) along the flow vs 2 Re F_{k, omega_t}(X), and F_{k, omega_t} across t."""
    n = grid.manifold.n
    path = FlowPath(X, T, grid, psi)
    mu = mu_k(k, grid, psi)
    direct, fd, ref, fvals = [], [], [], []
    sup_phi = 0.0
    times = [float(t) for t in times if t <= T + 1e-15]
    for tau in times:
        phi, vel = path.at_time(tau)
        K = grid.base_jet() + grid.jet(psi) + grid.jet(phi)
        mp = metric_from_jet(K, nodes=grid.points)
        sup_phi = max(sup_phi, float(np.max(np.abs(grid.values(phi)))))
        dens = euler_density(k, mp, mu)
        direct.append(-(n - k + 1) * integrate(grid, grid.values(vel) * dens))
        vals = []
        for s in (tau - h, tau + h):
            p, _ = path.at_time(s)
            vals.append(k_energy_lemma51(k, p, grid, base=psi, mu=mu).value)
        fd.append((vals[1] - vals[0]) / (2 * h))
        total = Combination.of(phi) if psi is None else Combination.of(psi) + phi
        F = futaki(k, X, total, grid, mu=mu)
        fvals.append(F)
        ref.append(2 * F.real)
    for tau in np.linspace(0, T, 5)[1:]:
        p, _ = path.at_time(float(tau))
        sup_phi = max(sup_phi, float(np.max(np.abs(grid.values(p)))))
    lie = max(lie_derivative_residual(path, tau) for tau in times)
    dep = max(abs(F - fvals[0]) for F in fvals)
    return FlowInvarianceReport(k, X.name, T, times, sup_phi, direct, fd, ref, fvals,
                          max(max(abs(v) for v in direct), max(abs(v) for v in fd)), dep, lie)
