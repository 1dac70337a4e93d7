"""Truncated power series in one variable with batched tensor coefficients.

A series is an array ``c[m, ...]`` holding the Taylor coefficients
``f^(m)(0) / m!`` for ``m = 0..K``.  The null geodesics that foliate a
neighbourhood of the horizon are computed in this form, so every derivative
in the null time at the horizon is exact up to rounding.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from ..errors import StructuralError
from ..geometry.fields import ChartMetric
from ..geometry.jets import Jet


def order_of(c: np.ndarray) -> int:
    return c.shape[0] - 1


@lru_cache(maxsize=None)
def _pairs(k: int):
    """Index pairs (i, j) with i + j <= k, grouped by i + j, and group starts."""
    pairs = [(i, m - i) for m in range(k + 1) for i in range(m + 1)]
    starts = np.array([m * (m + 1) // 2 for m in range(k + 1)])
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]), starts


def mul(spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cauchy product of two series, combining coefficients with ``einsum(spec)``.

    ``spec`` describes the per-coefficient operation without the series axis,
    e.g. ``"...ab,...b->...a"``.  The result is truncated to the shorter order.
    """
    k = min(order_of(a), order_of(b))
    i, j, starts = _pairs(k)
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    prod = np.einsum(f"P{sa},P{sb}->P{out}", a[i], b[j])
    return np.add.reduceat(prod, starts, axis=0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cauchy product of batched matrix series using ``@`` on the last two axes."""
    k = min(order_of(a), order_of(b))
    i, j, starts = _pairs(k)
    return np.add.reduceat(a[i] @ b[j], starts, axis=0)


def deriv(c: np.ndarray) -> np.ndarray:
    """d/dt; the result has one order less."""
    k = order_of(c)
    fac = np.arange(1, k + 1, dtype=float).reshape((-1,) + (1,) * (c.ndim - 1))
    return c[1:] * fac


def integ(c: np.ndarray, c0=0.0) -> np.ndarray:
    """Antiderivative with value ``c0`` at t = 0; the result has one order more."""
    k = order_of(c)
    fac = np.arange(1, k + 2, dtype=float).reshape((-1,) + (1,) * (c.ndim - 1))
    out = np.zeros((k + 2,) + c.shape[1:])
    out[0] = c0
    out[1:] = c / fac
    return out


def truncate(c: np.ndarray, k: int) -> np.ndarray:
    if k > order_of(c):
        raise StructuralError("cannot raise series order")
    return c[: k + 1]


def constant(value, k: int) -> np.ndarray:
    value = np.asarray(value, dtype=float)
    out = np.zeros((k + 1,) + value.shape)
    out[0] = value
    return out


def matinv(a: np.ndarray) -> np.ndarray:
    """Series of the inverse of a batched square-matrix series."""
    k = order_of(a)
    b = np.zeros_like(a)
    b[0] = np.linalg.inv(a[0])
    for m in range(1, k + 1):
        acc = np.einsum("j...ab,j...bc->...ac", a[1:m + 1], b[m - 1::-1]) if m > 1 else a[1] @ b[0]
        b[m] = -b[0] @ acc
    return b


def value_at(c: np.ndarray, t) -> np.ndarray:
    """Evaluate the truncated series at ``t`` (Horner)."""
    out = np.zeros(c.shape[1:])
    for m in range(order_of(c), -1, -1):
        out = out * t + c[m]
    return out


def derivative_at_zero(c: np.ndarray, m: int) -> np.ndarray:
    return c[m] * math.factorial(m)


# -- bridge to expression evaluation ----------------------------------------

def as_jets(x: np.ndarray) -> list[Jet]:
    """Split a coordinate series ``x[m, ..., i]`` into one scalar jet per coordinate."""
    k = order_of(x)
    return [Jet(x[..., i], 1, k) for i in range(x.shape[-1])]


def from_values(values, like: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Stack expression results (jets or plain numbers) into a series of ``shape``."""
    k = order_of(like)
    batch = like.shape[1:-1]
    out = np.zeros((k + 1,) + batch + (int(np.prod(shape)),))
    for j, v in enumerate(values):
        if isinstance(v, Jet):
            out[..., j] = v.c
        else:
            out[0, ..., j] = v
    return out.reshape((k + 1,) + batch + tuple(shape))


def metric_series(metric: ChartMetric, x: np.ndarray, with_partials: bool = True):
    """Series of ``g_ab`` (and ``d_c g_ab``, axes (c, a, b)) along a coordinate series ``x``."""
    if metric.exprs is None:
        raise StructuralError("series evaluation needs closed-form metric components")
    n = metric.dim
    env = dict(zip(metric.coords, as_jets(x)))
    g = from_values([e.evaluate(env) for e in metric.exprs], x, (n, n))
    if not with_partials:
        return g
    parts = [metric.symbolic_partial(a, b, [c]).evaluate(env)
             for c in range(n) for a in range(n) for b in range(n)]
    return g, from_values(parts, x, (n, n, n))


def christoffel_series(metric: ChartMetric, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(g, dg, Gamma)`` along ``x``; Gamma has axes (c, a, b) for Gamma^c_{ab}."""
    g, dg = metric_series(metric, x)
    n = g.shape[-1]
    low = 0.5 * (np.einsum("...adb->...dab", dg) + np.einsum("...bda->...dab", dg) - dg)
    gam = matmul(matinv(g), low.reshape(low.shape[:-2] + (n * n,)))
    return g, dg, gam.reshape(low.shape)


def geodesic_acceleration_series(metric: ChartMetric, x: np.ndarray, xd: np.ndarray) -> np.ndarray:
    """Series of ``-Gamma^c_{ab} xd^a xd^b`` along ``x`` (orders truncated to the shorter)."""
    k = min(order_of(x), order_of(xd))
    g, dg = metric_series(metric, x[:k + 1])
    xd = xd[:k + 1]
    w = matmul(dg, xd[..., None, :, None])[..., 0]  # d_c g_ab u^b, axes (c, a)
    low = matmul(xd[..., None, :], w)[..., 0, :] - 0.5 * matmul(w, xd[..., None])[..., 0]
    return -matmul(matinv(g), low[..., None])[..., 0]


def geodesic_series(metric: ChartMetric, x0: np.ndarray, v0: np.ndarray, order: int) -> np.ndarray:
    """Taylor series of the affinely parametrized geodesics with data ``(x0, v0)``.

    Picard iteration: pass ``i`` fixes coefficient ``i + 2`` exactly, and only
    needs the coefficients below it.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    x = np.zeros((order + 1,) + x0.shape)
    x[0] = x0
    if order >= 1:
        x[1] = v0
    for top in range(2, order + 1):
        acc = geodesic_acceleration_series(metric, x[:top - 1], deriv(x[:top]))
        x[:top + 1] = integ(integ(acc, v0), x0)
    return x
