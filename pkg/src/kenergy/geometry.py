"""Model manifolds, chart quadrature and metric/curvature evaluation.

Conventions: the Kahler form is omega = i g_{j kbar} dz^j ^ dzbar^k and the
Fubini-Study potential is log(1 + |z|^2), so Vol(CP^n) = (2 pi)^n.

Quadrature rules are built in the affine chart Z_0 = 1, but every node is
*evaluated* in the affine chart Z_j = 1 of its largest homogeneous
coordinate (so all evaluation coordinates satisfy |w_i| <= 1).  Curvature
computed from chart jets loses roughly |z|^4 * eps to cancellation, which
would otherwise dominate near the point at infinity.  The Jacobian of the
chart change is folded into the weights, so every integrand handed to
:func:`integrate` is simply a top-form density in the node's own chart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .jets import Jet4, squared_norm

KINDS = ("CP1", "CP2", "T2")


class NotAdmissibleError(ValueError):
    """Raised when g + ddbar(phi) fails to be positive definite."""

    def __init__(self, message: str, node=None, eigenvalue=None):
        super().__init__(message)
        self.node = node
        self.eigenvalue = eigenvalue


@dataclass(frozen=True)
class Manifold:
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unsupported manifold {self.kind!r}; expected one of {KINDS}")

    @property
    def n(self) -> int:
        return 2 if self.kind == "CP2" else 1

    @property
    def is_projective(self) -> bool:
        return self.kind.startswith("CP")

    def base_potential(self, nodes: np.ndarray, chart: int = 0) -> Jet4:
        """Fubini-Study potential on CP^n (same expression in every affine
        chart), |z|^2 on the flat torus."""
        s = squared_norm(nodes)
        if self.is_projective:
            return (s + 1.0).log()
        return s

    def base_potential_value(self, z: np.ndarray) -> np.ndarray:
        s = np.sum(np.abs(z) ** 2, axis=-1)
        return np.log1p(s) if self.is_projective else s


@dataclass(frozen=True)
class QuadratureGrid:
    """Chart nodes with positive Lebesgue weights.

    ``symmetry`` states which integrands the grid integrates correctly:
    ``"none"`` (all smooth integrands), ``"torus"`` (integrands invariant
    under the diagonal rotations z_j -> e^{i t_j} z_j) or ``"radial"``
    (U(n)-invariant integrands).

    ``nodes`` are evaluation coordinates in chart ``charts[i]``; ``points``
    are the same nodes in the chart Z_0 = 1.
    """

    manifold: Manifold
    nodes: np.ndarray
    weights: np.ndarray
    resolution: tuple
    symmetry: str = "none"
    charts: np.ndarray | None = None
    points: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)
    jet_cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.charts is None:
            object.__setattr__(self, "charts", np.zeros(len(self.weights), dtype=int))
        if self.points is None:
            object.__setattr__(self, "points", self.nodes)

    @property
    def size(self) -> int:
        return len(self.weights)

    def chart_groups(self):
        return [(int(j), np.flatnonzero(self.charts == j)) for j in np.unique(self.charts)]

    def assemble(self, evaluator) -> Jet4:
        """Jet at all nodes from ``evaluator(nodes, chart)`` applied chart by chart."""
        groups = self.chart_groups()
        if len(groups) == 1:
            return evaluator(self.nodes, groups[0][0])
        out = None
        for j, idx in groups:
            part = evaluator(self.nodes[idx], j)
            if out is None:
                out = np.zeros(part.c.shape[:1] + (self.size,), dtype=complex)
            out[:, idx] = part.c
        return Jet4(self.manifold.n, out)

    def base_jet(self) -> Jet4:
        if "base" not in self.jet_cache:
            self.jet_cache["base"] = (None, self.assemble(self.manifold.base_potential))
        return self.jet_cache["base"][1]

    def jet(self, pot) -> Jet4:
        """Jet of a potential at the nodes, cached per potential object."""
        from .potentials import Combination

        if pot is None:
            return Jet4.constant(self.manifold.n, 0.0, (self.size,))
        if isinstance(pot, Combination):
            out = Jet4.constant(self.manifold.n, pot.constant, (self.size,))
            for term, a in zip(pot.terms, pot.coefs):
                if a != 0.0:
                    out = out + self.jet(term) * a
            return out
        key = id(pot)
        if key not in self.jet_cache:
            self.jet_cache[key] = (pot, self.assemble(pot.jet))
        return self.jet_cache[key][1]

    def values(self, pot) -> np.ndarray:
        """Real values of a potential at the nodes."""
        return self.jet(pot).value.real

    def describe(self) -> dict:
        return {
            "manifold": self.manifold.kind,
            "resolution": list(self.resolution),
            "symmetry": self.symmetry,
            "nodes": self.size,
        }


MIN_RESOLUTION = {"rho": 4, "chi": 2, "theta": 4, "torus": 4}


def to_homogeneous(w: np.ndarray, chart: int) -> np.ndarray:
    """Homogeneous coordinates (Z_0, ..., Z_n) with Z_chart = 1."""
    w = np.asarray(w, dtype=complex)
    one = np.ones(w.shape[:-1] + (1,), dtype=complex)
    return np.concatenate([w[..., :chart], one, w[..., chart:]], axis=-1)


def from_homogeneous(Z: np.ndarray, chart: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=complex)
    w = Z / Z[..., chart : chart + 1]
    return np.delete(w, chart, axis=-1)


def change_chart(w: np.ndarray, src: int, dst: int) -> np.ndarray:
    return from_homogeneous(to_homogeneous(w, src), dst)


def best_chart(z: np.ndarray) -> np.ndarray:
    """Index of the largest homogeneous coordinate of chart-0 points ``z``."""
    return np.argmax(np.abs(to_homogeneous(z, 0)), axis=-1)


def _rechart(manifold: Manifold, z: np.ndarray, weights: np.ndarray, resolution, symmetry):
    """Move every chart-0 node to its best chart, adjusting weights by |det dw/dz|^2."""
    z = np.asarray(z, dtype=complex)
    charts = best_chart(z)
    nodes = z.copy()
    w = np.asarray(weights, dtype=float).copy()
    n = manifold.n
    for j in range(1, n + 1):
        m = charts == j
        if np.any(m):
            nodes[m] = change_chart(z[m], 0, j)
            w[m] = w[m] * np.abs(z[m, j - 1]) ** (-2.0 * (n + 1))
    return QuadratureGrid(manifold, nodes, w, tuple(resolution), symmetry, charts, z)


def _gauss_legendre(m: int, a: float, b: float):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def _radial(n_rho: int):
    # r = tan(rho/2), Gauss-Legendre in rho over (0, pi)
    rho, w = _gauss_legendre(n_rho, 0.0, math.pi)
    r = np.tan(rho / 2)
    dr = 0.5 / np.cos(rho / 2) ** 2
    return r, w * dr


def build_grid(manifold: Manifold, resolution, symmetry: str = "none") -> QuadratureGrid:
    """Quadrature grid on ``manifold``.

    resolution is ``(n_rho, n_theta)`` on CP1, ``(n_rho, n_chi, n_theta)`` on
    CP2 (n_theta per angle) and ``(m,)`` on T2.  With ``symmetry="radial"``
    only n_rho is used; with ``symmetry="torus"`` the angular count is 1.
    """
    resolution = tuple(int(r) for r in np.atleast_1d(resolution))
    kind = manifold.kind
    if symmetry not in ("none", "torus", "radial"):
        raise ValueError(f"unknown symmetry {symmetry!r}")

    if kind == "T2":
        m = resolution[0]
        if m < MIN_RESOLUTION["torus"]:
            raise ValueError(f"torus grid needs m >= {MIN_RESOLUTION['torus']}, got {m}")
        x = np.arange(m) / m
        X, Y = np.meshgrid(x, x, indexing="ij")
        nodes = (X + 1j * Y).reshape(-1, 1)
        weights = np.full(m * m, 1.0 / (m * m))
        return QuadratureGrid(manifold, nodes, weights, (m,), "none")

    n_rho = resolution[0]
    if n_rho < MIN_RESOLUTION["rho"]:
        raise ValueError(f"{kind} grid needs n_rho >= {MIN_RESOLUTION['rho']}, got {n_rho}")
    r, wr = _radial(n_rho)

    if symmetry == "radial":
        if manifold.n == 1:
            nodes = r.astype(complex).reshape(-1, 1)
            weights = 2 * math.pi * r * wr
        else:
            nodes = np.stack([r, np.zeros_like(r)], axis=-1).astype(complex)
            weights = 2 * math.pi**2 * r**3 * wr
        return _rechart(manifold, nodes, weights, (n_rho,), "radial")

    if manifold.n == 1:
        n_theta = 1 if symmetry == "torus" else resolution[1]
        if symmetry == "none" and n_theta < MIN_RESOLUTION["theta"]:
            raise ValueError(f"n_theta >= {MIN_RESOLUTION['theta']} required, got {n_theta}")
        theta = 2 * math.pi * np.arange(n_theta) / n_theta
        R, T = np.meshgrid(r, theta, indexing="ij")
        W = np.broadcast_to((r * wr)[:, None], R.shape) * (2 * math.pi / n_theta)
        nodes = (R * np.exp(1j * T)).reshape(-1, 1)
        return _rechart(manifold, nodes, W.reshape(-1), (n_rho, n_theta), symmetry)

    n_chi = resolution[1]
    if n_chi < MIN_RESOLUTION["chi"]:
        raise ValueError(f"n_chi >= {MIN_RESOLUTION['chi']} required, got {n_chi}")
    n_theta = 1 if symmetry == "torus" else resolution[2]
    if symmetry == "none" and n_theta < MIN_RESOLUTION["theta"]:
        raise ValueError(f"n_theta >= {MIN_RESOLUTION['theta']} required, got {n_theta}")
    chi, wchi = _gauss_legendre(n_chi, 0.0, math.pi / 2)
    theta = 2 * math.pi * np.arange(n_theta) / n_theta
    R, C, T1, T2 = np.meshgrid(r, chi, theta, theta, indexing="ij")
    WR, WC = np.meshgrid(r**3 * wr, np.sin(chi) * np.cos(chi) * wchi, indexing="ij")
    W = (WR * WC)[:, :, None, None] * (2 * math.pi / n_theta) ** 2
    W = np.broadcast_to(W, R.shape)
    nodes = np.stack(
        [R * np.cos(C) * np.exp(1j * T1), R * np.sin(C) * np.exp(1j * T2)], axis=-1
    ).reshape(-1, 2)
    return _rechart(manifold, nodes, W.reshape(-1), (n_rho, n_chi, n_theta), symmetry)


def default_grid(manifold: Manifold, level: int = 1, symmetry: str = "none") -> QuadratureGrid:
    """Desk-scale grids; ``level`` doubles the resolution each step."""
    f = 2 ** (level - 1)
    if manifold.kind == "CP1":
        res = (32 * f, 32 * f)
    elif manifold.kind == "CP2":
        res = (40 * f,) if symmetry == "radial" else (16 * f, 10 * f, 12 * f)
    else:
        res = (24 * f,)
    return build_grid(manifold, res, symmetry)


# ---------------------------------------------------------------------------
# metric and curvature


# ---------------------------------------------------------------------------
# small dense algebra over a batch of nodes
#
# numpy's batched einsum, eigvalsh and inv carry a large per-matrix overhead
# for the 1x1 and 2x2 matrices that occur here; the closed forms below are
# elementwise array arithmetic and several times faster on full grids.


def hermitian_min_eigenvalue(g: np.ndarray) -> np.ndarray:
    n = g.shape[-1]
    if n == 1:
        return g[..., 0, 0].real
    if n == 2:
        a, d = g[..., 0, 0].real, g[..., 1, 1].real
        return 0.5 * (a + d) - np.hypot(0.5 * (a - d), np.abs(g[..., 0, 1]))
    return np.linalg.eigvalsh(g)[..., 0]


def inverse_and_det(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = g.shape[-1]
    if n == 1:
        det = g[..., 0, 0]
        return 1.0 / g, det
    if n == 2:
        a, b, c, d = g[..., 0, 0], g[..., 0, 1], g[..., 1, 0], g[..., 1, 1]
        det = a * d - b * c
        inv = np.empty_like(g)
        inv[..., 0, 0], inv[..., 0, 1] = d / det, -b / det
        inv[..., 1, 0], inv[..., 1, 1] = -c / det, a / det
        return inv, det
    return np.linalg.inv(g), np.linalg.det(g)


def contract_middle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """out[..., i, j, k, l] = sum_p a[..., k, i, p] b[..., l, p, j]."""
    n = a.shape[-1]
    out = 0
    for p in range(n):
        ap = np.swapaxes(a[..., p], -1, -2)          # (i, k)
        bp = np.swapaxes(b[..., :, p, :], -1, -2)    # (j, l)
        out = out + ap[..., :, None, :, None] * bp[..., None, :, None, :]
    return out


def raise_second(R: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """out[..., a, b, k, l] = sum_q R[..., a, q, k, l] g_inv[..., q, b]."""
    n = g_inv.shape[-1]
    out = 0
    for q in range(n):
        out = out + R[..., :, q, None, :, :] * g_inv[..., None, q, :, None, None]
    return out


@dataclass
class MetricPoint:
    """Kahler metric data at every node of a batch.

    Arrays carry the node axis first.  ``g[..., i, j]`` is g_{i jbar};
    ``dg[..., k, i, j]`` is d_k g_{i jbar}; ``dbg[..., l, i, j]`` is
    dbar_l g_{i jbar}; ``ddg[..., k, l, i, j]`` is d_k dbar_l g_{i jbar};
    ``R[..., i, j, k, l]`` is R_{i jbar k lbar}.
    """

    g: np.ndarray
    dg: np.ndarray
    dbg: np.ndarray
    ddg: np.ndarray
    g_inv: np.ndarray
    det_g: np.ndarray
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.g.shape[-1]

    @property
    def endomorphism_curvature(self) -> np.ndarray:
        """(F_alpha^beta)_{k lbar} = R_{alpha qbar k lbar} g^{qbar beta}, axes (alpha, beta, k, l)."""
        return raise_second(self.R, self.g_inv)

    def min_eigenvalue(self) -> np.ndarray:
        return hermitian_min_eigenvalue(self.g)


def metric_from_jet(K: Jet4, check: bool = True, nodes=None) -> MetricPoint:
    """Metric, derivatives and curvature of the Kahler potential ``K``."""
    n = K.n
    shape = K.batch_shape
    g = np.empty(shape + (n, n), dtype=complex)
    dg = np.empty(shape + (n, n, n), dtype=complex)
    dbg = np.empty(shape + (n, n, n), dtype=complex)
    ddg = np.empty(shape + (n, n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            g[..., i, j] = K.partial((i,), (j,))
            for k in range(n):
                dg[..., k, i, j] = K.partial((k, i), (j,))
                dbg[..., k, i, j] = K.partial((i,), (k, j))
                for l in range(n):
                    ddg[..., k, l, i, j] = K.partial((k, i), (l, j))
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    if check:
        lam = hermitian_min_eigenvalue(g)
        if not np.all(lam > 0):
            bad = int(np.argmin(lam.reshape(-1)))
            node = None if nodes is None else np.asarray(nodes).reshape(-1, n)[bad]
            raise NotAdmissibleError(
                f"metric not positive definite (not in P(M, omega)) at node {bad}"
                + ("" if node is None else f" z={node}") + f", eigenvalue {lam.reshape(-1)[bad]:.3e}",
                node=node, eigenvalue=float(lam.reshape(-1)[bad]),
            )
    g_inv, det_g = inverse_and_det(g)
    det_g = det_g.real
    # R_{i jbar k lbar} = -d_k dbar_l g_{i jbar} + g^{qbar p} d_k g_{i qbar} dbar_l g_{p jbar}
    # (d_k g_{i qbar}) g^{qbar p}, axes (k, i, p)
    dg_ginv = sum(dg[..., :, :, q, None] * g_inv[..., None, None, q, :] for q in range(n))
    R = contract_middle(dg_ginv, dbg) - np.einsum("...klij->...ijkl", ddg)
    return MetricPoint(g, dg, dbg, ddg, g_inv, det_g, R)


def metric_at(manifold: Manifold, phi: Jet4 | None, nodes: np.ndarray,
              base: Jet4 | None = None, check: bool = True) -> MetricPoint:
    """g_phi = g + ddbar(phi) at ``nodes``; ``base`` overrides the base potential jet."""
    K = manifold.base_potential(nodes) if base is None else base
    if phi is not None:
        K = K + phi
    return metric_from_jet(K, check=check, nodes=nodes)


@dataclass(frozen=True)
class PositivityReport:
    admissible: bool
    min_eigenvalue: float
    node: np.ndarray


def positivity_check(manifold: Manifold, phi: Jet4 | None, grid: QuadratureGrid,
                     base: Jet4 | None = None) -> PositivityReport:
    """Smallest eigenvalue of g_phi over the grid (each node in its own chart)."""
    K = grid.base_jet() if base is None else base
    if phi is not None:
        K = K + phi
    lam = metric_from_jet(K, check=False).min_eigenvalue()
    i = int(np.argmin(lam))
    return PositivityReport(bool(lam[i] > 0), float(lam[i]), grid.points[i])


# ---------------------------------------------------------------------------
# integration


def fsum_complex(values: np.ndarray) -> complex:
    values = np.asarray(values).reshape(-1)
    re = math.fsum(values.real.tolist())
    if np.iscomplexobj(values):
        return complex(re, math.fsum(values.imag.tolist()))
    return re


def integrate(grid: QuadratureGrid, density, real: bool = True):
    """Integrate a top-degree form over the manifold.

    ``density`` is either a :class:`~kenergy.forms.FormValue` of bidegree
    (n, n) or an array of Lebesgue densities at the grid nodes.  Summation
    is exactly rounded (``math.fsum``), hence order independent.
    """
    from .forms import FormValue

    if isinstance(density, FormValue):
        density = density.top_density()
    density = np.asarray(density)
    if density.shape != grid.weights.shape:
        raise ValueError(f"integrand shape {density.shape} does not match grid {grid.weights.shape}")
    if not np.all(np.isfinite(density)):
        raise ValueError("integrand contains NaN or inf")
    total = fsum_complex(grid.weights * density)
    if real and isinstance(total, complex):
        return total.real
    return total


def volume(grid: QuadratureGrid, base: Jet4 | None = None) -> float:
    from .forms import omega_power

    mp = metric_from_jet(grid.base_jet() if base is None else base, nodes=grid.points)
    return integrate(grid, omega_power(mp, grid.manifold.n))
