"""Closed-form reference values and a finite-difference jet oracle.

Reference values come from c(T CP^n) = (1 + h)^{n+1} with [omega] = 2 pi h
and the integral of h^n equal to 1; for the flat torus C / (Z + iZ) every
curvature integral vanishes and V = 2 (omega = 2 dx ^ dy).
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from math import comb, factorial

import numpy as np

from .jets import Jet4, _table


@dataclass(frozen=True)
class ReferenceTable:
    manifold: str
    n: int
    volume: float
    euler: int
    chern_numbers: tuple  # integral of c_k ^ omega^{n-k}, k = 0..n
    mu: tuple  # mu_k, k = 0..n
    lam: float

    def as_dict(self) -> dict:
        return {
            "manifold": self.manifold,
            "V": self.volume,
            "chi": self.euler,
            "int_ck_omega": list(self.chern_numbers),
            "mu": list(self.mu),
            "lambda": self.lam,
        }


def cohomology_reference(kind: str) -> ReferenceTable:
    if kind in ("CP1", "CP2"):
        n = 1 if kind == "CP1" else 2
        ints = tuple(comb(n + 1, k) * (2 * math.pi) ** (n - k) for k in range(n + 1))
        vol = (2 * math.pi) ** n
        mu = tuple(x / vol for x in ints)
        return ReferenceTable(kind, n, vol, n + 1, ints, mu, 2 * math.pi * mu[1])
    if kind == "T2":
        return ReferenceTable(kind, 1, 2.0, 0, (2.0, 0.0), (1.0, 0.0), 0.0)
    raise ValueError(f"no reference values for {kind!r}")


# ---------------------------------------------------------------------------
# finite differences


STENCIL = np.arange(-4, 5)


def _stencil_weights(order: int) -> np.ndarray:
    """Central weights on offsets -4..4 for the ``order``-th derivative (unit spacing)."""
    m = len(STENCIL)
    V = np.vander(STENCIL.astype(float), m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = factorial(order)
    return np.linalg.solve(V, rhs)


_WEIGHTS = [_stencil_weights(p) for p in range(5)]


def _real_partials(f, node: np.ndarray, h: float) -> dict:
    """All real partials of order <= 4 in (x_1, y_1, ..., x_n, y_n)."""
    n = len(node)
    nreal = 2 * n
    offs = STENCIL * h
    grids = np.meshgrid(*([offs] * nreal), indexing="ij")
    z = np.empty(grids[0].shape + (n,), dtype=complex)
    for j in range(n):
        z[..., j] = node[j] + grids[2 * j] + 1j * grids[2 * j + 1]
    F = np.asarray(f(z.reshape(-1, n)), dtype=float).reshape(grids[0].shape)
    out = {}
    for alpha in itertools.product(range(5), repeat=nreal):
        if sum(alpha) > 4:
            continue
        val = F
        for p in alpha:
            val = np.tensordot(_WEIGHTS[p], val, axes=([0], [0]))
        out[alpha] = float(val) / h ** sum(alpha)
    return out


def _complex_operator(a: int, b: int) -> dict:
    """(1/2)^{a+b} (dx - i dy)^a (dx + i dy)^b as {(p, q): coefficient of dx^p dy^q}."""
    poly = {(0, 0): 1.0 + 0j}
    for factor in [(1.0, -1j)] * a + [(1.0, 1j)] * b:
        new: dict = {}
        for (p, q), c in poly.items():
            new[(p + 1, q)] = new.get((p + 1, q), 0) + 0.5 * c * factor[0]
            new[(p, q + 1)] = new.get((p, q + 1), 0) + 0.5 * c * factor[1]
        poly = new
    return poly


def _complex_from_real(n: int, real: dict) -> np.ndarray:
    exps = _table(n)[0]
    weight = _table(n)[4]
    coeffs = np.zeros(len(exps), dtype=complex)
    for idx, e in enumerate(exps):
        ops = [_complex_operator(e[j], e[n + j]) for j in range(n)]
        total = 0j
        for combo in itertools.product(*[list(o.items()) for o in ops]):
            alpha = []
            c = 1.0 + 0j
            for (p, q), cc in combo:
                alpha += [p, q]
                c *= cc
            total += c * real[tuple(alpha)]
        coeffs[idx] = total / weight[idx]
    return coeffs


class FiniteDifferenceWarning(UserWarning):
    pass


@dataclass
class FDJet:
    jet: Jet4
    error: np.ndarray  # Richardson discrepancy per monomial, relative to max(1, |value|)
    unstable: bool


def finite_difference_jets(f, node, h: float = 0.05, warn_tol: float = 1e-4) -> FDJet:
    """Order-4 jet of ``f`` at ``node`` from central differences.

    ``f`` maps an (N, n) complex array to N real values.  A nine-point
    stencil per real direction is combined at spacings h and h/2 by
    Richardson extrapolation; the discrepancy between the two levels is
    returned as an error estimate and drives the instability flag.
    """
    if not 1e-3 <= h <= 0.5:
        raise ValueError(f"finite-difference step h={h} outside the stable range [1e-3, 0.5]")
    node = np.atleast_1d(np.asarray(node, dtype=complex))
    n = len(node)
    coarse = _complex_from_real(n, _real_partials(f, node, h))
    fine = _complex_from_real(n, _real_partials(f, node, h / 2))
    degree = _table(n)[2]
    # leading truncation error is O(h^8) for orders <= 2 and O(h^6) above
    p = np.where(degree <= 2, 8, 6)
    r = 2.0**p
    extrap = (r * fine - coarse) / (r - 1)
    scale = np.maximum(1.0, np.abs(extrap))
    err = np.abs(fine - coarse) / scale
    unstable = bool(np.any(err > warn_tol))
    if unstable:
        warnings.warn(
            f"finite-difference jets unstable at h={h}: max discrepancy {err.max():.2e}",
            FiniteDifferenceWarning,
        )
    return FDJet(Jet4(n, extrap[:, None]).take(0), err, unstable)
