"""Truncated Taylor arithmetic in the independent variables z, z-bar.

A :class:`Jet4` stores, for every node of a batch, the Taylor coefficients

    f(z + d, zbar + e) = sum_{|a| + |b| <= 4} c[a, b] d^a e^b

of a scalar field, with z and zbar treated as independent variables.  The
mixed partial derivative is recovered as ``a! b! c[a, b]``.  Products,
sums and composition with univariate functions are exact up to round-off,
which is what makes order-4 curvature computations usable at 1e-8 levels.
"""
from __future__ import annotations

from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np
import scipy.sparse as sparse

ORDER = 4
_CHUNK = 1 << 20  # pair-products per block in Jet4.__mul__


@lru_cache(maxsize=None)
def _table(n: int):
    nvar = 2 * n
    exps: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            exps.append(tuple(prefix))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e, slots - 1)

    rec([], ORDER, nvar)
    exps.sort(key=lambda e: (sum(e), tuple(-x for x in e)))
    index = {e: i for i, e in enumerate(exps)}
    degree = np.array([sum(e) for e in exps])

    pi, pj, pk = [], [], []
    for i, ei in enumerate(exps):
        for j, ej in enumerate(exps):
            if degree[i] + degree[j] <= ORDER:
                pi.append(i)
                pj.append(j)
                pk.append(index[tuple(a + b for a, b in zip(ei, ej))])
    order = np.argsort(pk, kind="stable")
    pi = np.array(pi)[order]
    pj = np.array(pj)[order]
    pk = np.array(pk)[order]
    weight = np.array(
        [np.prod([factorial(x) for x in e]) for e in exps], dtype=float
    )
    # conjugation swaps the z and zbar halves of every exponent
    swap = np.array([index[e[n:] + e[:n]] for e in exps])
    return exps, index, degree, (pi, pj, pk), weight, swap


def exponent(n: int, zidx: Sequence[int] = (), widx: Sequence[int] = ()) -> tuple[int, ...]:
    e = [0] * (2 * n)
    for i in zidx:
        e[i] += 1
    for j in widx:
        e[n + j] += 1
    return tuple(e)


class Jet4:
    """Order-4 jet of a scalar field on C^n, batched over nodes."""

    __slots__ = ("n", "c")

    def __init__(self, n: int, coeffs: np.ndarray):
        self.n = n
        self.c = np.asarray(coeffs, dtype=complex)
        if self.c.shape[0] != len(_table(n)[0]):
            raise ValueError("coefficient array has wrong number of monomials")

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, n: int, value, batch_shape=()) -> "Jet4":
        m = len(_table(n)[0])
        value = np.broadcast_to(np.asarray(value, dtype=complex), batch_shape)
        c = np.zeros((m,) + tuple(batch_shape), dtype=complex)
        c[0] = value
        return cls(n, c)

    @classmethod
    def coordinate(cls, nodes: np.ndarray, j: int, conjugate: bool = False) -> "Jet4":
        """Jet of z_j (or of zbar_j) at each node; ``nodes`` has shape (N, n)."""
        nodes = np.asarray(nodes, dtype=complex)
        n = nodes.shape[-1]
        jet = cls.constant(n, np.conj(nodes[..., j]) if conjugate else nodes[..., j],
                           nodes.shape[:-1])
        e = exponent(n, (), (j,)) if conjugate else exponent(n, (j,), ())
        jet.c[_table(n)[1][e]] = 1.0
        return jet

    @classmethod
    def zeros_like(cls, other: "Jet4") -> "Jet4":
        return cls(other.n, np.zeros_like(other.c))

    # -- access -------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def batch_shape(self):
        return self.c.shape[1:]

    def coeff(self, e: tuple[int, ...]) -> np.ndarray:
        return self.c[_table(self.n)[1][e]]

    def partial(self, zidx: Sequence[int] = (), widx: Sequence[int] = ()) -> np.ndarray:
        """d/dz_{zidx[0]} ... d/dzbar_{widx[0]} ... of the field."""
        e = exponent(self.n, zidx, widx)
        if sum(e) > ORDER:
            raise ValueError("derivative order exceeds jet order")
        tab = _table(self.n)
        i = tab[1][e]
        return tab[4][i] * self.c[i]

    def partial_ab(self, a: Sequence[int], b: Sequence[int]) -> np.ndarray:
        """Partial with multiplicity vectors a (holomorphic) and b (antiholomorphic)."""
        e = tuple(a) + tuple(b)
        tab = _table(self.n)
        i = tab[1][e]
        return tab[4][i] * self.c[i]

    def conj(self) -> "Jet4":
        """Jet of the complex conjugate field."""
        return Jet4(self.n, np.conj(self.c[_table(self.n)[5]]))

    def take(self, index) -> "Jet4":
        return Jet4(self.n, self.c[(slice(None),) + (index,)])

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet4):
            return Jet4(self.n, self.c + other.c)
        c = self.c.copy()
        c[0] = c[0] + other
        return Jet4(self.n, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet4(self.n, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet4):
            return Jet4(self.n, self.c * np.asarray(other))
        pi, pj, pk = _table(self.n)[3]
        m = self.c.shape[0]
        # skip monomials that vanish identically (coordinate and monomial jets are sparse)
        live_a = np.any(self.c.reshape(m, -1) != 0, axis=1)
        live_b = np.any(other.c.reshape(m, -1) != 0, axis=1)
        keep = live_a[pi] & live_b[pj]
        shape = np.broadcast_shapes(self.c.shape, other.c.shape)
        if not keep.any():
            return Jet4(self.n, np.zeros(shape, dtype=complex))
        a_idx, b_idx = pi[keep], pj[keep]
        npair = len(a_idx)
        S = sparse.csr_matrix((np.ones(npair), (pk[keep], np.arange(npair))), shape=(m, npair))
        A = np.broadcast_to(self.c, shape).reshape(m, -1)
        B = np.broadcast_to(other.c, shape).reshape(m, -1)
        out = np.empty((m, A.shape[1]), dtype=complex)
        # chunk over nodes so the (pairs x nodes) temporary stays cache-sized
        step = max(1, _CHUNK // max(npair, 1))
        for lo in range(0, A.shape[1], step):
            hi = lo + step
            out[:, lo:hi] = S @ (A[a_idx, lo:hi] * B[b_idx, lo:hi])
        return Jet4(self.n, out.reshape(shape))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet4):
            return self * other.reciprocal()
        return Jet4(self.n, self.c / np.asarray(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, (int, np.integer)) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = Jet4.constant(self.n, 1.0, self.batch_shape)
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def compose(self, derivs: Sequence[np.ndarray]) -> "Jet4":
        """f(self) given f, f', ..., f'''' evaluated at ``self.value``."""
        delta = Jet4(self.n, self.c.copy())
        delta.c[0] = 0.0
        out = Jet4.constant(self.n, derivs[0], self.batch_shape)
        power = None
        for m in range(1, ORDER + 1):
            power = delta if power is None else power * delta
            out = out + power * (np.asarray(derivs[m]) / factorial(m))
        return out

    def reciprocal(self) -> "Jet4":
        x = self.value
        return self.compose([1 / x, -1 / x**2, 2 / x**3, -6 / x**4, 24 / x**5])

    def log(self) -> "Jet4":
        x = self.value
        return self.compose([np.log(x), 1 / x, -1 / x**2, 2 / x**3, -6 / x**4])

    def exp(self) -> "Jet4":
        e = np.exp(self.value)
        return self.compose([e] * (ORDER + 1))

    def real(self) -> "Jet4":
        return (self + self.conj()) * 0.5


def squared_norm(nodes: np.ndarray) -> Jet4:
    """Jet of |z|^2 = sum z_j zbar_j."""
    nodes = np.asarray(nodes, dtype=complex)
    n = nodes.shape[-1]
    out = Jet4.constant(n, 0.0, nodes.shape[:-1])
    for j in range(n):
        out = out + Jet4.coordinate(nodes, j) * Jet4.coordinate(nodes, j, conjugate=True)
    return out


def monomial_rows(nodes: np.ndarray, a: Sequence[int], b: Sequence[int]):
    """Nonzero Taylor rows of z^a zbar^b as ``[(row, values), ...]``.

    From the binomial expansion of each factor; only exponents e <= (a, b)
    contribute.
    """
    nodes = np.asarray(nodes, dtype=complex)
    n = nodes.shape[-1]
    powers = tuple(a) + tuple(b)
    base = np.concatenate([nodes, np.conj(nodes)], axis=-1)
    out = []
    for idx, e in enumerate(_table(n)[0]):
        if any(ei > pi for ei, pi in zip(e, powers)):
            continue
        term = np.ones(nodes.shape[:-1], dtype=complex)
        for v, (ei, pi) in enumerate(zip(e, powers)):
            if pi > ei:
                term = term * (comb(pi, ei) * base[..., v] ** (pi - ei))
            elif pi:
                term = term * comb(pi, ei)
        out.append((idx, term))
    return out


def monomial(nodes: np.ndarray, a: Sequence[int], b: Sequence[int]) -> Jet4:
    """Jet of z^a zbar^b."""
    nodes = np.asarray(nodes, dtype=complex)
    n = nodes.shape[-1]
    c = np.zeros((len(_table(n)[0]),) + nodes.shape[:-1], dtype=complex)
    for idx, v in monomial_rows(nodes, a, b):
        c[idx] = v
    return Jet4(n, c)
