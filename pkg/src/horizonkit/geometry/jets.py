"""Truncated multivariate Taylor series ("jets") with tensor-valued coefficients.

A :class:`Jet` stores the Taylor coefficients of a tensor field around a
(possibly batched) base point up to a fixed total degree.  Arithmetic on jets is
exact up to floating point rounding, so differentiating a polynomial or closed
form metric through jets never introduces finite-difference noise.

Coefficient array layout: ``c[m, *batch, *tensor]`` where ``m`` enumerates the
monomials ``dx^alpha`` with ``|alpha| <= order`` sorted by degree.
"""
from __future__ import annotations

import itertools
import math
import string
from functools import lru_cache

import numpy as np

_TENSOR_LETTERS = string.ascii_lowercase
_BATCH_LETTERS = "BCDEFGHIJKLMNO"


class JetSpace:
    """Monomial bookkeeping for jets in ``dim`` variables up to degree ``order``."""

    def __init__(self, dim: int, order: int):
        self.dim = dim
        self.order = order
        monos = []
        for deg in range(order + 1):
            block = [a for a in itertools.product(range(deg + 1), repeat=dim) if sum(a) == deg]
            block.sort(reverse=True)
            monos.extend(block)
        self.monomials = monos
        self.index = {a: i for i, a in enumerate(monos)}
        self.count = [sum(1 for a in monos if sum(a) <= k) for k in range(order + 1)]
        self.factorial = np.array([math.prod(math.factorial(x) for x in a) for a in monos], dtype=float)
        self._pairs = {}
        self._grads = {}

    def size(self, order: int) -> int:
        return self.count[order]

    def pairs(self, order: int):
        """Index triples ``(i, j, starts)`` for products truncated at ``order``.

        Pairs are sorted by target monomial so ``np.add.reduceat`` with
        ``starts`` accumulates them.
        """
        if order not in self._pairs:
            n = self.count[order]
            trip = []
            for i in range(n):
                ai = self.monomials[i]
                for j in range(n):
                    aj = self.monomials[j]
                    s = tuple(x + y for x, y in zip(ai, aj))
                    if sum(s) <= order:
                        trip.append((self.index[s], i, j))
            trip.sort()
            k = np.array([t[0] for t in trip])
            starts = np.searchsorted(k, np.arange(n))
            self._pairs[order] = (np.array([t[1] for t in trip]), np.array([t[2] for t in trip]), starts)
        return self._pairs[order]

    def gradient_map(self, order: int, axis: int):
        """Source indices and factors for d/dx_axis of a jet of the given order."""
        key = (order, axis)
        if key not in self._grads:
            n_out = self.count[order - 1]
            src = np.empty(n_out, dtype=int)
            fac = np.empty(n_out)
            for m in range(n_out):
                a = list(self.monomials[m])
                a[axis] += 1
                src[m] = self.index[tuple(a)]
                fac[m] = a[axis]
            self._grads[key] = (src, fac)
        return self._grads[key]


@lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


class Jet:
    """Taylor jet of a tensor field; see module docstring for the layout."""

    __array_priority__ = 100

    def __init__(self, c: np.ndarray, dim: int, order: int, rank: int = 0):
        self.c = np.asarray(c, dtype=float)
        self.dim = dim
        self.order = order
        self.rank = rank
        if self.c.shape[0] != jet_space(dim, order).size(order):
            raise ValueError("coefficient array does not match jet order")

    # -- construction -----------------------------------------------------
    @classmethod
    def variable(cls, i: int, point: np.ndarray, order: int) -> "Jet":
        point = np.asarray(point, dtype=float)
        dim = point.shape[-1]
        space = jet_space(dim, order)
        c = np.zeros((space.size(order),) + point.shape[:-1])
        c[0] = point[..., i]
        if order >= 1:
            e = [0] * dim
            e[i] = 1
            c[space.index[tuple(e)]] = 1.0
        return cls(c, dim, order)

    @classmethod
    def coordinates(cls, point: np.ndarray, order: int) -> list["Jet"]:
        point = np.asarray(point, dtype=float)
        return [cls.variable(i, point, order) for i in range(point.shape[-1])]

    @classmethod
    def constant(cls, value, like: "Jet", rank: int = 0) -> "Jet":
        value = np.asarray(value, dtype=float)
        batch = like.batch_shape
        tshape = value.shape[value.ndim - rank:] if rank else ()
        c = np.zeros((like.c.shape[0],) + batch + tshape)
        c[0] = np.broadcast_to(value, batch + tshape)
        return cls(c, like.dim, like.order, rank)

    @classmethod
    def stack(cls, items, shape: tuple[int, ...]) -> "Jet":
        """Assemble scalar-or-tensor jets (flat list, row-major) into a tensor jet."""
        items = list(items)
        order = min(j.order for j in items if isinstance(j, Jet))
        ref = next(j for j in items if isinstance(j, Jet))
        rank0 = ref.rank
        arrs = []
        for j in items:
            if not isinstance(j, Jet):
                j = cls.constant(j, ref.truncate(order))
            arrs.append(j.truncate(order).c)
        batch = np.broadcast_shapes(*[a.shape[1:a.ndim - rank0] for a in arrs])
        arrs = [np.broadcast_to(a, (a.shape[0],) + batch + a.shape[a.ndim - rank0:]) for a in arrs]
        c = np.stack(arrs, axis=1 + len(batch))
        tshape = c.shape[2 + len(batch):]
        c = c.reshape(c.shape[:1] + batch + tuple(shape) + tshape)
        return cls(c, ref.dim, order, rank0 + len(shape))

    # -- shape helpers ----------------------------------------------------
    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.c.shape[1:self.c.ndim - self.rank]

    @property
    def tensor_shape(self) -> tuple[int, ...]:
        return self.c.shape[self.c.ndim - self.rank:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def truncate(self, order: int) -> "Jet":
        if order == self.order:
            return self
        if order > self.order:
            raise ValueError("cannot raise jet order")
        return Jet(self.c[: jet_space(self.dim, self.order).size(order)], self.dim, order, self.rank)

    def _with(self, c, rank=None) -> "Jet":
        return Jet(c, self.dim, self.order, self.rank if rank is None else rank)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is None:
            c = a.c.copy()
            c[0] = c[0] + other
            return a._with(c)
        return a._with(_bcast_add(a, b))

    __radd__ = __add__

    def __neg__(self):
        return self._with(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            if self.rank == 0 and other.rank == 0:
                return contract("", "", "", self, other)
            if self.rank == 0 or other.rank == 0:
                s, t = (self, other) if self.rank == 0 else (other, self)
                letters = _TENSOR_LETTERS[: t.rank]
                return contract("", letters, letters, s, t)
            raise TypeError("use contract() for tensor-tensor products")
        other = np.asarray(other, dtype=float)
        if other.ndim == 0:
            return self._with(self.c * other)
        return self._with(self.c * other[None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) or float(n).is_integer():
            n = int(n)
            if n < 0:
                return (self ** (-n)).reciprocal()
            result = Jet.constant(1.0, self) if self.rank == 0 else None
            base = self
            while n:
                if n & 1:
                    result = base if result is None else result * base
                base = base * base
                n >>= 1
            return result
        return (self.log() * float(n)).exp()

    # -- scalar functions via nilpotent series ----------------------------
    def _split(self):
        c0 = self.c[0]
        u = self.c.copy()
        u[0] = 0.0
        return c0, self._with(u)

    def _series(self, coeffs):
        """Evaluate sum_k coeffs[k] * u**k for the nilpotent part u."""
        c0, u = self._split()
        out = self._with(np.zeros_like(self.c))
        power = Jet.constant(1.0, self)
        for k in range(self.order + 1):
            out = out + power * coeffs[k]
            if k < self.order:
                power = power * u
        return out

    def exp(self):
        c0 = self.c[0]
        e = np.exp(c0)
        return self._series([e / math.factorial(k) for k in range(self.order + 1)])

    def sin(self):
        c0 = self.c[0]
        s, co = np.sin(c0), np.cos(c0)
        cyc = [s, co, -s, -co]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self):
        c0 = self.c[0]
        s, co = np.sin(c0), np.cos(c0)
        cyc = [co, -s, -co, s]
        return self._series([cyc[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def log(self):
        c0 = self.c[0]
        coeffs = [np.log(c0)] + [(-1) ** (k + 1) / (k * c0**k) for k in range(1, self.order + 1)]
        return self._series(coeffs)

    def reciprocal(self):
        c0 = self.c[0]
        return self._series([(-1) ** k / c0 ** (k + 1) for k in range(self.order + 1)])

    # -- calculus ---------------------------------------------------------
    def d(self) -> "Jet":
        """Coordinate gradient; the new index becomes the first tensor axis."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        space = jet_space(self.dim, self.order)
        parts = []
        for axis in range(self.dim):
            src, fac = space.gradient_map(self.order, axis)
            shape = (-1,) + (1,) * (self.c.ndim - 1)
            parts.append(self.c[src] * fac.reshape(shape))
        pos = 1 + len(self.batch_shape)
        c = np.stack(parts, axis=pos)
        return Jet(c, self.dim, self.order - 1, self.rank + 1)

    def partials(self, k: int) -> np.ndarray:
        """All k-th coordinate partials at the base point, derivative axes last."""
        space = jet_space(self.dim, self.order)
        out = np.zeros(self.batch_shape + self.tensor_shape + (self.dim,) * k)
        for combo in itertools.product(range(self.dim), repeat=k):
            alpha = [0] * self.dim
            for i in combo:
                alpha[i] += 1
            m = space.index[tuple(alpha)]
            out[(...,) + combo] = self.c[m] * space.factorial[m]
        return out

    # -- tensor ops -------------------------------------------------------
    def transpose(self, perm) -> "Jet":
        nb = 1 + len(self.batch_shape)
        axes = list(range(nb)) + [nb + p for p in perm]
        return self._with(self.c.transpose(axes))

    def trace(self, i: int, j: int) -> "Jet":
        letters = list(_TENSOR_LETTERS[: self.rank])
        letters[j] = letters[i]
        out = "".join(x for k, x in enumerate(letters) if k not in (i, j))
        return einsum1("".join(letters), out, self)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, batch={self.batch_shape}, tensor={self.tensor_shape})"


def _bcast_add(a: Jet, b: Jet) -> np.ndarray:
    ca, cb = a.c, b.c
    ra, rb = a.rank, b.rank
    if ra != rb:
        raise ValueError("rank mismatch in jet addition")
    ba, bb = a.batch_shape, b.batch_shape
    batch = np.broadcast_shapes(ba, bb)
    ca = ca.reshape(ca.shape[:1] + (1,) * (len(batch) - len(ba)) + ca.shape[1:])
    cb = cb.reshape(cb.shape[:1] + (1,) * (len(batch) - len(bb)) + cb.shape[1:])
    return ca + cb


def einsum1(spec_in: str, spec_out: str, a: Jet) -> Jet:
    """Linear tensor operation (trace/transpose) on the tensor axes of a jet."""
    nb = len(a.batch_shape)
    pre = "A" + _BATCH_LETTERS[:nb]
    c = np.einsum(f"{pre}{spec_in}->{pre}{spec_out}", a.c)
    return Jet(c, a.dim, a.order, len(spec_out))


def contract(spec_a: str, spec_b: str, spec_out: str, a: Jet, b: Jet) -> Jet:
    """Leibniz product of two jets contracted like ``einsum(spec_a,spec_b->spec_out)``."""
    order = min(a.order, b.order)
    a, b = a.truncate(order), b.truncate(order)
    ba, bb = a.batch_shape, b.batch_shape
    batch = np.broadcast_shapes(ba, bb)
    nb = len(batch)
    ca = a.c.reshape(a.c.shape[:1] + (1,) * (nb - len(ba)) + a.c.shape[1:])
    cb = b.c.reshape(b.c.shape[:1] + (1,) * (nb - len(bb)) + b.c.shape[1:])
    space = jet_space(a.dim, order)
    i, j, starts = space.pairs(order)
    bl = _BATCH_LETTERS[:nb]
    prod = np.einsum(f"A{bl}{spec_a},A{bl}{spec_b}->A{bl}{spec_out}", ca[i], cb[j])
    c = np.add.reduceat(prod, starts, axis=0)
    return Jet(c, a.dim, order, len(spec_out))


def matinv(g: Jet) -> Jet:
    """Inverse of a matrix-valued jet via the nilpotent Neumann series."""
    g0 = g.c[0]
    g0inv = np.linalg.inv(g0)
    inv0 = Jet.constant(g0inv, g, rank=2)
    h = g._with(g.c.copy())
    h.c[0] = 0.0
    x = -contract("ij", "jk", "ik", h, inv0)
    term = inv0
    total = inv0
    for _ in range(g.order):
        term = contract("ik", "kj", "ij", term, x)
        total = total + term
    return total
