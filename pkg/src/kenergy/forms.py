"""Pointwise (p, q)-forms on a chart of C^n, batched over nodes.

A form is stored over ordered index sets,

    a = sum_{I, J} a[I, J] dz^I ^ dzbar^J,

with ``I`` and ``J`` increasing tuples.  The coefficient array has shape
``(C(n, p), C(n, q)) + batch``; the batch part may carry node axes and,
for endomorphism-valued forms, matrix axes as well.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def index_sets(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    return tuple(combinations(range(n), p))


def _sort_sign(seq: tuple[int, ...]):
    """Sign of the permutation sorting ``seq``, or 0 if it repeats an index."""
    if len(set(seq)) < len(seq):
        return 0, None
    sign = 1
    s = list(seq)
    for i in range(len(s)):
        for j in range(len(s) - 1 - i):
            if s[j] > s[j + 1]:
                s[j], s[j + 1] = s[j + 1], s[j]
                sign = -sign
    return sign, tuple(s)


@lru_cache(maxsize=None)
def _wedge_table(n, pa, qa, pb, qb):
    Ia, Ja = index_sets(n, pa), index_sets(n, qa)
    Ib, Jb = index_sets(n, pb), index_sets(n, qb)
    Ic = {I: k for k, I in enumerate(index_sets(n, pa + pb))}
    Jc = {J: k for k, J in enumerate(index_sets(n, qa + qb))}
    out = []
    # moving dz^K across dzbar^J costs (-1)^{|J||K|}
    base = -1 if (qa * pb) % 2 else 1
    for ia, I in enumerate(Ia):
        for ib, K in enumerate(Ib):
            s1, IK = _sort_sign(I + K)
            if not s1:
                continue
            for ja, J in enumerate(Ja):
                for jb, L in enumerate(Jb):
                    s2, JL = _sort_sign(J + L)
                    if not s2:
                        continue
                    out.append((ia, ja, ib, jb, Ic[IK], Jc[JL], base * s1 * s2))
    return tuple(out)


class FormValue:
    """A (p, q)-form with coefficients over ordered multi-indices."""

    __slots__ = ("n", "p", "q", "c")

    def __init__(self, n: int, p: int, q: int, coeffs):
        if not (0 <= p <= n and 0 <= q <= n):
            raise ValueError(f"bidegree ({p}, {q}) out of range for n = {n}")
        self.n, self.p, self.q = n, p, q
        self.c = np.asarray(coeffs, dtype=complex)
        if self.c.shape[:2] != (comb(n, p), comb(n, q)):
            raise ValueError("coefficient array does not match bidegree")

    @property
    def bidegree(self) -> tuple[int, int]:
        return self.p, self.q

    @property
    def batch_shape(self):
        return self.c.shape[2:]

    @classmethod
    def scalar(cls, n: int, value) -> "FormValue":
        value = np.asarray(value, dtype=complex)
        return cls(n, 0, 0, value[None, None])

    @classmethod
    def zero(cls, n: int, p: int, q: int, batch_shape=()) -> "FormValue":
        return cls(n, p, q, np.zeros((comb(n, p), comb(n, q)) + tuple(batch_shape), complex))

    @classmethod
    def from_11(cls, coeff: np.ndarray) -> "FormValue":
        """(1,1)-form sum_{k,l} coeff[..., k, l] dz^k ^ dzbar^l."""
        coeff = np.asarray(coeff)
        return cls(coeff.shape[-1], 1, 1, np.moveaxis(coeff, (-2, -1), (0, 1)))

    def __getitem__(self, index) -> "FormValue":
        """Index into the batch part (e.g. pick a matrix entry)."""
        if not isinstance(index, tuple):
            index = (index,)
        return FormValue(self.n, self.p, self.q, self.c[(slice(None), slice(None)) + index])

    def _check_same(self, other: "FormValue"):
        if (self.n, self.p, self.q) != (other.n, other.p, other.q):
            raise ValueError("forms of different bidegree cannot be added")

    def __add__(self, other):
        if other == 0:
            return self
        self._check_same(other)
        return FormValue(self.n, self.p, self.q, self.c + other.c)

    __radd__ = __add__

    def __sub__(self, other):
        self._check_same(other)
        return FormValue(self.n, self.p, self.q, self.c - other.c)

    def __neg__(self):
        return FormValue(self.n, self.p, self.q, -self.c)

    def __mul__(self, f):
        """Multiply by a scalar or by a batch-shaped function."""
        return FormValue(self.n, self.p, self.q, self.c * np.asarray(f))

    __rmul__ = __mul__

    def __xor__(self, other: "FormValue") -> "FormValue":
        return wedge(self, other)

    def conj(self) -> "FormValue":
        """Complex conjugate; swaps the roles of dz and dzbar.

        Only implemented for p = q, where conj(dz^I ^ dzbar^J) equals
        (-1)^{p q} dz^J ^ dzbar^I = (-1)^p dz^J ^ dzbar^I.
        """
        if self.p != self.q:
            raise NotImplementedError("conjugation implemented for (p, p) forms only")
        sign = -1 if self.p % 2 else 1
        return FormValue(self.n, self.p, self.q, sign * np.conj(np.swapaxes(self.c, 0, 1)))

    def top_density(self) -> np.ndarray:
        """Lebesgue density of an (n, n)-form.

        dz^1..dz^n ^ dzbar^1..dzbar^n = (-1)^{n(n-1)/2} (-2i)^n d^{2n}x.
        """
        if (self.p, self.q) != (self.n, self.n):
            raise ValueError(f"expected an ({self.n},{self.n})-form, got ({self.p},{self.q})")
        n = self.n
        factor = (-1) ** (n * (n - 1) // 2) * (-2j) ** n
        return (factor * self.c[0, 0]).real

    def top_density_complex(self) -> np.ndarray:
        n = self.n
        return (-1) ** (n * (n - 1) // 2) * (-2j) ** n * self.c[0, 0]

    def allclose(self, other: "FormValue", **kw) -> bool:
        return self.bidegree == other.bidegree and np.allclose(self.c, other.c, **kw)


def wedge(a: FormValue, b: FormValue) -> FormValue:
    if a.n != b.n:
        raise ValueError("forms live on different dimensions")
    n = a.n
    p, q = a.p + b.p, a.q + b.q
    if p > n or q > n:
        raise ValueError(f"wedge degree overflow: ({p}, {q}) exceeds n = {n}")
    shape = np.broadcast_shapes(a.batch_shape, b.batch_shape)
    out = np.zeros((comb(n, p), comb(n, q)) + shape, dtype=complex)
    for ia, ja, ib, jb, ic, jc, sign in _wedge_table(n, a.p, a.q, b.p, b.q):
        out[ic, jc] += sign * a.c[ia, ja] * b.c[ib, jb]
    return FormValue(n, p, q, out)


def kahler_form(g: np.ndarray) -> FormValue:
    """omega = i g_{k lbar} dz^k ^ dzbar^l."""
    return FormValue.from_11(1j * np.asarray(g))


def omega_power(metric, m: int) -> FormValue:
    """m-fold wedge power of the Kahler form of ``metric`` (a MetricPoint or array g)."""
    g = metric.g if hasattr(metric, "g") else np.asarray(metric)
    n = g.shape[-1]
    if not 0 <= m <= n:
        raise ValueError(f"omega power {m} out of range 0..{n}")
    out = FormValue.scalar(n, np.ones(g.shape[:-2]))
    om = kahler_form(g)
    for _ in range(m):
        out = wedge(out, om)
    return out


def power_of(form: FormValue, m: int) -> FormValue:
    out = FormValue.scalar(form.n, np.ones(form.batch_shape))
    for _ in range(m):
        out = wedge(out, form)
    return out


def mixed_sum(omega: FormValue, omega_phi: FormValue, total: int) -> FormValue:
    """sum_{i=0}^{total} omega^i ^ omega_phi^{total - i}."""
    if omega.bidegree != (1, 1) or omega_phi.bidegree != (1, 1):
        raise ValueError("mixed_sum expects two (1,1)-forms")
    n = omega.n
    if not 0 <= total <= n:
        raise ValueError(f"total degree {total} out of range 0..{n}")
    shape = np.broadcast_shapes(omega.batch_shape, omega_phi.batch_shape)
    powers_a = [FormValue.scalar(n, np.ones(shape))]
    powers_b = [FormValue.scalar(n, np.ones(shape))]
    for _ in range(total):
        powers_a.append(wedge(powers_a[-1], omega))
        powers_b.append(wedge(powers_b[-1], omega_phi))
    out = FormValue.zero(n, total, total, shape)
    for i in range(total + 1):
        out = out + wedge(powers_a[i], powers_b[total - i])
    return out


def binomial_identity_sides(x, y, m: int):
    """Both sides of sum_i C(m+1, i) x^i (y-x)^{m-i} = sum_i x^i y^{m-i}."""
    lhs = sum(comb(m + 1, i) * x**i * (y - x) ** (m - i) for i in range(m + 1))
    rhs = sum(x**i * y ** (m - i) for i in range(m + 1))
    return lhs, rhs


def trace_pairing(A: FormValue, B: FormValue) -> FormValue:
    """tr(A ^ B) for endomorphism-valued forms with matrix axes last: sum A[a,b] ^ B[b,a]."""
    r = A.batch_shape[-1]
    out = None
    for a in range(r):
        for b in range(r):
            term = wedge(A[..., a, b], B[..., b, a])
            out = term if out is None else out + term
    return out


def trace(A: FormValue) -> FormValue:
    r = A.batch_shape[-1]
    out = A[..., 0, 0]
    for a in range(1, r):
        out = out + A[..., a, a]
    return out

