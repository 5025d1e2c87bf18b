"""Families of globally smooth potentials with exact jets.

Every potential can be evaluated pointwise (``pot(z)`` with ``z`` of shape
(N, n) in the chart Z_0 = 1) and as an order-4 jet at a batch of nodes in
any affine chart (``pot.jet(nodes, chart)``).  The pointwise evaluator is
what the finite-difference oracle consumes.

On CP^n the building blocks are u = |z|^2 / (1 + |z|^2) and the functions
z^a zbar^b / (1 + |z|^2)^d with |a|, |b| <= d, which are exactly the
restrictions of smooth functions on projective space that are polynomial
in the homogeneous coordinates.  Written homogeneously,

    u = 1 - |Z_0|^2 / |Z|^2,    z^a zbar^b / (1+|z|^2)^d = Z^A Zbar^B / |Z|^{2d}

with A = (d - |a|, a), B = (d - |b|, b), so the jet in the chart Z_j = 1
is obtained by setting Z_j = 1.
"""
from __future__ import annotations

import math

from dataclasses import dataclass
from math import factorial
from typing import Sequence

import numpy as np

from .jets import ORDER, Jet4, monomial_rows, squared_norm


class Potential:
    """Real scalar field on the manifold."""

    n: int

    def jet(self, nodes: np.ndarray, chart: int = 0) -> Jet4:
        raise NotImplementedError

    def __call__(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other):
        return Combination.of(self) + other

    __radd__ = __add__

    def __mul__(self, c):
        return Combination.of(self) * c

    __rmul__ = __mul__

    def __neg__(self):
        return Combination.of(self) * -1.0

    def __sub__(self, other):
        return Combination.of(self) + (-1.0) * other


@dataclass(frozen=True, eq=False)
class Constant(Potential):
    n: int
    value: float

    def jet(self, nodes, chart=0):
        return Jet4.constant(self.n, self.value, np.asarray(nodes).shape[:-1])

    def __call__(self, z):
        z = np.asarray(z)
        return np.full(z.shape[:-1], float(self.value))


@dataclass(frozen=True, eq=False)
class Combination(Potential):
    """sum_i coef_i * term_i + constant."""

    n: int
    terms: tuple = ()
    coefs: tuple = ()
    constant: float = 0.0

    @classmethod
    def of(cls, pot: Potential) -> "Combination":
        if isinstance(pot, Combination):
            return pot
        return cls(pot.n, (pot,), (1.0,), 0.0)

    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return Combination(self.n, self.terms, self.coefs, self.constant + float(other))
        other = Combination.of(other)
        if other.n != self.n:
            raise ValueError("potentials live on different dimensions")
        return Combination(self.n, self.terms + other.terms, self.coefs + other.coefs,
                           self.constant + other.constant)

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        return Combination(self.n, self.terms, tuple(c * a for a in self.coefs), c * self.constant)

    __rmul__ = __mul__

    def jet(self, nodes, chart=0):
        out = Jet4.constant(self.n, self.constant, np.asarray(nodes).shape[:-1])
        for term, a in zip(self.terms, self.coefs):
            if a != 0.0:
                out = out + term.jet(nodes, chart) * a
        return out

    def __call__(self, z):
        z = np.asarray(z)
        out = np.full(z.shape[:-1], self.constant, dtype=float)
        for term, a in zip(self.terms, self.coefs):
            out = out + a * term(z)
        return out


def zero_potential(n: int) -> Combination:
    return Combination(n)


# ---------------------------------------------------------------------------
# CP^n families


def homogeneous_jets(nodes: np.ndarray, chart: int = 0) -> list[Jet4]:
    """Jets of the homogeneous coordinates Z_0..Z_n normalised by Z_chart = 1."""
    nodes = np.asarray(nodes, dtype=complex)
    n = nodes.shape[-1]
    coords = [Jet4.coordinate(nodes, m) for m in range(n)]
    one = Jet4.constant(n, 1.0, nodes.shape[:-1])
    return coords[:chart] + [one] + coords[chart:]


def hermitian_form_jet(Z: Sequence[Jet4], H: np.ndarray) -> Jet4:
    """Jet of Z^* H Z = sum_{ij} conj(Z_i) H_ij Z_j."""
    Zb = [z.conj() for z in Z]
    out = None
    for i, zi in enumerate(Zb):
        row = None
        for j, zj in enumerate(Z):
            if H[i, j] != 0:
                term = zj * complex(H[i, j])
                row = term if row is None else row + term
        if row is not None:
            term = zi * row
            out = term if out is None else out + term
    return Jet4.zeros_like(Z[0]) if out is None else out


def u_jet(nodes: np.ndarray, chart: int = 0) -> Jet4:
    """Jet of u = (|Z_1|^2 + ... + |Z_n|^2) / |Z|^2 in the chart Z_chart = 1."""
    nodes = np.asarray(nodes, dtype=complex)
    s = squared_norm(nodes)
    if chart == 0:
        num = s
    else:
        # w_0 stands for Z_0; the remaining Z_i contribute 1 + sum_{m >= 1} |w_m|^2
        n = nodes.shape[-1]
        num = Jet4.constant(n, 1.0, nodes.shape[:-1])
        for m in range(1, n):
            num = num + Jet4.coordinate(nodes, m) * Jet4.coordinate(nodes, m, conjugate=True)
    return num * (s + 1.0).reciprocal()


def u_value(z: np.ndarray) -> np.ndarray:
    s = np.sum(np.abs(z) ** 2, axis=-1)
    return s / (1 + s)


@dataclass(frozen=True, eq=False)
class RadialPotential(Potential):
    """phi = f(u) for a polynomial f(u) = sum_j coeffs[j] u^j on CP^n."""

    n: int
    coeffs: tuple

    def _derivs(self, u):
        p = np.polynomial.Polynomial(self.coeffs)
        out = []
        for _ in range(ORDER + 1):
            out.append(p(u))
            p = p.deriv()
        return out

    def profile_derivs(self, u, order: int = ORDER + 1):
        return self._derivs(u)[:order]

    def jet(self, nodes, chart=0):
        u = u_jet(nodes, chart)
        return u.compose(self._derivs(u.value.real))

    def __call__(self, z):
        return np.polynomial.Polynomial(self.coeffs)(u_value(z))


@dataclass(frozen=True, eq=False)
class LogRadialPotential(Potential):
    """phi = log(1 + a u) + c, the pulled-back Fubini-Study potential along z -> e^t z."""

    n: int
    a: float
    c: float = 0.0

    def profile_derivs(self, u, order: int = ORDER + 1):
        x = 1 + self.a * u
        a = self.a
        d = [np.log(x) + self.c, a / x, -(a**2) / x**2, 2 * a**3 / x**3, -6 * a**4 / x**4]
        return d[:order]

    def jet(self, nodes, chart=0):
        u = u_jet(nodes, chart)
        return u.compose(self.profile_derivs(u.value.real))

    def __call__(self, z):
        return np.log1p(self.a * u_value(z)) + self.c


@dataclass(frozen=True, eq=False)
class HarmonicPotential(Potential):
    """phi = Re( sum_t c_t z^{a_t} zbar^{b_t} ) / (1 + |z|^2)^d with |a_t|, |b_t| <= d.

    ``terms`` is a tuple of ``(a, b, c)`` with multi-indices a, b and a
    complex coefficient c.
    """

    n: int
    d: int
    terms: tuple

    def __post_init__(self):
        for a, b, _ in self.terms:
            if len(a) != self.n or len(b) != self.n:
                raise ValueError("multi-index length must equal n")
            if sum(a) > self.d or sum(b) > self.d:
                raise ValueError(
                    f"z^{a} zbar^{b} / (1+|z|^2)^{self.d} does not extend smoothly to CP^{self.n}"
                )

    def chart_exponents(self, a, b, chart: int):
        """Exponents of z^a zbar^b (1 + |z|^2)^{-d} numerator in the chart Z_chart = 1."""
        A = (self.d - sum(a),) + tuple(a)
        B = (self.d - sum(b),) + tuple(b)
        return A[:chart] + A[chart + 1 :], B[:chart] + B[chart + 1 :]

    def jet(self, nodes, chart=0):
        nodes = np.asarray(nodes, dtype=complex)
        acc = Jet4.constant(self.n, 0.0, nodes.shape[:-1])
        for a, b, c in self.terms:
            for row, v in monomial_rows(nodes, *self.chart_exponents(a, b, chart)):
                acc.c[row] += c * v
        num = acc.real()
        w = squared_norm(nodes) + 1.0
        return num * (w.reciprocal() ** self.d)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        num = np.zeros(z.shape[:-1], dtype=complex)
        for a, b, c in self.terms:
            num += c * np.prod(z ** np.array(a) * np.conj(z) ** np.array(b), axis=-1)
        s = np.sum(np.abs(z) ** 2, axis=-1)
        return num.real / (1 + s) ** self.d


def harmonic_basis(n: int, d: int, invariant: str = "none") -> list[HarmonicPotential]:
    """Real basis of span{z^a zbar^b / (1+|z|^2)^d : |a|, |b| <= d}.

    invariant="torus" keeps only the |z_1|^{2a} |z_2|^{2b} terms, invariant="radial"
    only powers of u.
    """
    if invariant == "radial":
        return [RadialPotential(n, tuple([0.0] * j + [1.0])) for j in range(1, d + 1)]
    multis = [m for m in np.ndindex(*([d + 1] * n)) if sum(m) <= d]
    out = []
    for a in multis:
        for b in multis:
            if invariant == "torus" and a != b:
                continue
            if a == b:
                out.append(HarmonicPotential(n, d, ((a, b, 1.0),)))
            elif a < b:
                out.append(HarmonicPotential(n, d, ((a, b, 1.0),)))
                out.append(HarmonicPotential(n, d, ((a, b, 1j),)))
    return out


def zonal_basis(n: int, degrees: Sequence[int]) -> list[RadialPotential]:
    """Radial potentials P_l(1 - 2u); on CP^1 these are the zonal spherical harmonics."""
    out = []
    for l in degrees:
        leg = np.polynomial.Legendre.basis(l).convert(kind=np.polynomial.Polynomial)
        p = leg(np.polynomial.Polynomial([1.0, -2.0]))
        out.append(RadialPotential(n, tuple(p.coef)))
    return out


@dataclass(frozen=True, eq=False)
class PullbackFSPotential(Potential):
    """phi = log(|M Z|^2 / |Z|^2) + c: Phi^* omega_FS = omega_FS + i ddbar phi for Phi = [M]."""

    n: int
    M: np.ndarray
    c: float = 0.0

    def jet(self, nodes, chart=0):
        Z = homogeneous_jets(nodes, chart)
        M = np.asarray(self.M, dtype=complex)
        num = hermitian_form_jet(Z, M.conj().T @ M)
        den = hermitian_form_jet(Z, np.eye(self.n + 1))
        return num.log() - den.log() + self.c

    def __call__(self, z):
        Z = np.concatenate([np.ones(np.shape(z)[:-1] + (1,)), np.asarray(z, dtype=complex)], -1)
        MZ = Z @ np.asarray(self.M, dtype=complex).T
        return (np.log(np.sum(np.abs(MZ) ** 2, -1)) - np.log(np.sum(np.abs(Z) ** 2, -1))
                + self.c)


@dataclass(frozen=True, eq=False)
class HermitianRatioPotential(Potential):
    """phi = Re(Z^* H Z / |Z|^2) + c for a (not necessarily Hermitian) matrix H."""

    n: int
    H: np.ndarray
    M: np.ndarray | None = None
    c: float = 0.0

    def jet(self, nodes, chart=0):
        Z = homogeneous_jets(nodes, chart)
        H = np.asarray(self.H, dtype=complex)
        M = np.eye(self.n + 1) if self.M is None else np.asarray(self.M, dtype=complex)
        num = hermitian_form_jet(Z, M.conj().T @ H @ M)
        den = hermitian_form_jet(Z, M.conj().T @ M)
        return (num * den.reciprocal()).real() + self.c

    def __call__(self, z):
        Z = np.concatenate([np.ones(np.shape(z)[:-1] + (1,)), np.asarray(z, dtype=complex)], -1)
        if self.M is not None:
            Z = Z @ np.asarray(self.M, dtype=complex).T
        num = np.einsum("...i,ij,...j->...", Z.conj(), np.asarray(self.H, dtype=complex), Z)
        return (num / np.sum(np.abs(Z) ** 2, -1)).real + self.c


# ---------------------------------------------------------------------------
# torus family


@dataclass(frozen=True, eq=False)
class FourierPotential(Potential):
    """phi = Re( sum_t c_t exp(2 pi i (m_t x + l_t y)) ) on C / (Z + iZ)."""

    n: int
    terms: tuple  # ((m, l, c), ...)

    def jet(self, nodes, chart=0):
        if chart != 0:
            raise ValueError("the torus has a single chart")
        nodes = np.asarray(nodes, dtype=complex)
        z = Jet4.coordinate(nodes, 0)
        w = Jet4.coordinate(nodes, 0, conjugate=True)
        out = Jet4.constant(1, 0.0, nodes.shape[:-1])
        for m, l, c in self.terms:
            # m x + l y with x = (z + zbar)/2, y = (z - zbar)/(2i)
            alpha = 2j * np.pi * (0.5 * m - 0.5j * l)
            beta = 2j * np.pi * (0.5 * m + 0.5j * l)
            e = (z * alpha + w * beta).exp()
            out = out + e * (0.5 * c) + e.conj() * (0.5 * np.conj(c))
        return out

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)[..., 0]
        x, y = z.real, z.imag
        out = np.zeros(z.shape)
        for m, l, c in self.terms:
            out += (c * np.exp(2j * np.pi * (m * x + l * y))).real
        return out


def fourier_basis(max_mode: int) -> list[FourierPotential]:
    out = []
    for m in range(-max_mode, max_mode + 1):
        for l in range(0, max_mode + 1):
            if l == 0 and m <= 0:
                continue
            out.append(FourierPotential(1, ((m, l, 1.0),)))
            out.append(FourierPotential(1, ((m, l, 1j),)))
    return out


# ---------------------------------------------------------------------------
# random family members


def random_potential(kind: str, rng: np.random.Generator, scale: float = 0.1,
                     family: str | None = None) -> Potential:
    """A random small member of the default family for ``kind``."""
    if kind == "T2":
        terms = tuple(
            # i ddbar of a unit mode has size pi^2 (m^2 + l^2) relative to omega
            (int(m), int(l), complex(*rng.normal(size=2)) * scale / (math.pi**2 * (m * m + l * l)))
            for m, l in ((1, 0), (0, 1), (1, 1), (2, -1))
        )
        return FourierPotential(1, terms)
    n = 2 if kind == "CP2" else 1
    family = family or "harmonic"
    if family == "radial":
        c = rng.normal(size=4) * scale
        c[0] = 0.0
        return RadialPotential(n, tuple(c))
    d = 2
    multis = [m for m in np.ndindex(*([d + 1] * n)) if sum(m) <= d]
    pairs = [(a, b) for a in multis for b in multis if a <= b and (a, b) != ((0,) * n, (0,) * n)]
    # normalised so that the relative metric perturbation is of order ``scale`` for every n
    amp = scale / math.sqrt(len(pairs))
    terms = [(a, b, complex(*rng.normal(size=2)) * amp) for a, b in pairs]
    return HarmonicPotential(n, d, tuple(terms))


def chart_transition_defect(pot: Potential, kind: str, h: float = 1e-3, samples: int = 8) -> float:
    """Spread of phi near a point at infinity, measured in a second chart.

    On CP^1 the second chart is w = 1/z; on CP^2 it is (w1, w2) with
    z = (1/w1, w2/w1).  A smooth extension has spread O(h) as w1 -> 0.
    """
    if kind == "T2":
        z = np.array([[0.3 + 0.2j], [1.3 + 0.2j], [0.3 + 1.2j]])
        v = pot(z)
        return float(np.ptp(v))
    ang = 2 * np.pi * np.arange(samples) / samples
    w1 = h * np.exp(1j * ang)
    if kind == "CP1":
        z = (1 / w1)[:, None]
    else:
        w2 = 0.4 - 0.2j
        z = np.stack([1 / w1, w2 / w1], axis=-1)
    return float(np.ptp(pot(z)))


def taylor_factor(e) -> float:
    return float(np.prod([factorial(x) for x in e]))


def potential_battery(grid) -> list[Potential]:
    """Smooth test functions compatible with the symmetry of ``grid``."""
    kind = grid.manifold.kind
    n = grid.manifold.n
    if kind == "T2":
        return [FourierPotential(1, ((m, l, c),)) for m, l in ((1, 0), (0, 1), (1, 1)) for c in (1.0, 1j)]
    radial = [RadialPotential(n, tuple([0.0] * j + [1.0])) for j in (1, 2, 3)]
    if grid.symmetry == "radial":
        return radial
    if grid.symmetry == "torus":
        return radial + [b for b in harmonic_basis(n, 1, "torus")]
    return radial + harmonic_basis(n, 1)
