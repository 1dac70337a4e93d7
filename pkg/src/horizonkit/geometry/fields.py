"""Coordinate-chart metrics and tensor fields with exact jets.

Component functions are plain callables taking a list of coordinate values
(floats, arrays or :class:`Jet`) and returning a flat, row-major list of
components.  Closed-form catalog entries wrap :mod:`horizonkit.expr` trees;
randomized test metrics use :class:`Polynomial`, whose jets come from an exact
Taylor shift.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import expr as ex
from ..errors import SingularMetricError, StructuralError
from .jets import Jet, jet_space

ComponentFn = Callable[[list], list]


class Polynomial:
    """Multivariate polynomial with float coefficients, keyed by exponent tuples."""

    def __init__(self, dim: int, terms: dict[tuple[int, ...], float] | None = None):
        self.dim = dim
        self.terms = {k: float(v) for k, v in (terms or {}).items() if v != 0.0}

    @classmethod
    def constant(cls, dim: int, value: float) -> "Polynomial":
        return cls(dim, {(0,) * dim: value})

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def __call__(self, xs):
        if xs and isinstance(xs[0], Jet):
            return self.jet(xs)
        total = 0.0
        for exps, coef in self.terms.items():
            t = coef
            for x, e in zip(xs, exps):
                if e:
                    t = t * x**e
            total = total + t
        return total

    def jet(self, xs: list[Jet]) -> Jet:
        """Exact Taylor jet at the base point of the coordinate jets ``xs``."""
        ref = xs[0]
        order = ref.order
        point = np.stack([x.c[0] for x in xs], axis=-1)
        space = jet_space(self.dim, order)
        c = np.zeros((space.size(order),) + ref.batch_shape)
        for exps, coef in self.terms.items():
            for alpha in itertools.product(*(range(e + 1) for e in exps)):
                if sum(alpha) > order:
                    continue
                t = coef
                for i, (a, e) in enumerate(zip(alpha, exps)):
                    if e:
                        t = t * math.comb(e, a) * point[..., i] ** (e - a)
                m = space.index[alpha]
                c[m] = c[m] + t
        return Jet(c, self.dim, order)

    def to_expr(self, coords: Sequence[str]) -> ex.Expr:
        out: ex.Expr = ex.ZERO
        for exps, coef in sorted(self.terms.items()):
            t: ex.Expr = ex.Num(coef)
            for name, e in zip(coords, exps):
                if e:
                    t = ex.mul(t, ex.power(ex.Var(name), ex.Num(float(e))))
            out = ex.add(out, t)
        return out

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator, scale: float = 1.0) -> "Polynomial":
        terms = {}
        for exps in itertools.product(range(degree + 1), repeat=dim):
            if sum(exps) <= degree:
                terms[exps] = scale * rng.uniform(-1.0, 1.0)
        return cls(dim, terms)


def _expr_fn(exprs: Sequence[ex.Expr], coords: Sequence[str]) -> ComponentFn:
    def fn(xs):
        env = dict(zip(coords, xs))
        out = []
        for e in exprs:
            v = e.evaluate(env)
            out.append(v)
        return out

    return fn


def _as_jet_list(values, ref: Jet) -> list:
    return [v if isinstance(v, Jet) else Jet.constant(v, ref) for v in values]


@dataclass
class TensorFieldNum:
    """A tensor field on a chart given by component functions.

    ``up[i]`` is the variance of slot ``i`` (True = contravariant).
    """

    dim: int
    up: tuple[bool, ...]
    fn: ComponentFn
    exprs: tuple[ex.Expr, ...] | None = None
    coords: tuple[str, ...] | None = None
    symmetric: bool = False
    name: str = ""

    @property
    def rank(self) -> int:
        return len(self.up)

    def jet(self, point, order: int) -> Jet:
        point = np.asarray(point, dtype=float)
        xs = Jet.coordinates(point, order)
        vals = _as_jet_list(self.fn(xs), xs[0])
        if self.rank == 0:
            return vals[0]
        return Jet.stack(vals, (self.dim,) * self.rank)

    def at(self, point) -> np.ndarray:
        return self.jet(point, 0).value

    def symbolic_partial(self, component: tuple[int, ...], wrt: Sequence[int]) -> ex.Expr:
        if self.exprs is None:
            raise StructuralError("field has no closed-form expressions")
        flat = int(np.ravel_multi_index(component, (self.dim,) * self.rank)) if self.rank else 0
        e = self.exprs[flat]
        for i in wrt:
            e = e.diff(self.coords[i])
        return e

    def __add__(self, other: "TensorFieldNum") -> "TensorFieldNum":
        if other.up != self.up:
            raise StructuralError("variance mismatch")
        f, g = self.fn, other.fn
        return TensorFieldNum(self.dim, self.up, lambda xs: [a + b for a, b in zip(f(xs), g(xs))],
                              symmetric=self.symmetric and other.symmetric)

    def scaled(self, s: float) -> "TensorFieldNum":
        f = self.fn
        return TensorFieldNum(self.dim, self.up, lambda xs: [a * s for a in f(xs)],
                              symmetric=self.symmetric, name=self.name)

    @classmethod
    def from_expressions(cls, coords: Sequence[str], components, up: tuple[bool, ...], **kw):
        coords = tuple(coords)
        flat = np.asarray(components, dtype=object).ravel().tolist()
        exprs = tuple(ex.parse(c) if not isinstance(c, ex.Expr) else c for c in flat)
        return cls(len(coords), up, _expr_fn(exprs, coords), exprs=exprs, coords=coords, **kw)

    @classmethod
    def from_polynomials(cls, polys: Sequence[Polynomial], up: tuple[bool, ...], **kw):
        polys = list(polys)
        dim = polys[0].dim
        return cls(dim, up, lambda xs: [p(xs) for p in polys], **kw)


VectorFieldNum = TensorFieldNum
TwoTensorNum = TensorFieldNum


def vector_field(coords: Sequence[str], components, name: str = "") -> TensorFieldNum:
    return TensorFieldNum.from_expressions(coords, components, (True,), name=name)


def two_tensor(coords: Sequence[str], components, symmetric: bool = True, name: str = "") -> TensorFieldNum:
    return TensorFieldNum.from_expressions(coords, components, (False, False), symmetric=symmetric, name=name)


@dataclass
class ChartMetric:
    """A metric given by closed-form or polynomial component functions on one chart."""

    dim: int
    fn: ComponentFn
    coords: tuple[str, ...] = ()
    exprs: tuple[ex.Expr, ...] | None = None
    lorentzian: bool = True
    name: str = ""
    _field: TensorFieldNum = field(init=False, repr=False)

    def __post_init__(self):
        if not self.coords:
            self.coords = tuple(f"x{i}" for i in range(self.dim))
        self._field = TensorFieldNum(self.dim, (False, False), self.fn, exprs=self.exprs,
                                     coords=self.coords, symmetric=True)

    @classmethod
    def from_expressions(cls, coords: Sequence[str], matrix, **kw) -> "ChartMetric":
        coords = tuple(coords)
        n = len(coords)
        rows = [[ex.parse(c) if not isinstance(c, ex.Expr) else c for c in row] for row in matrix]
        for i in range(n):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise StructuralError(f"metric component ({i},{j}) is not symmetric")
        exprs = tuple(e for row in rows for e in row)
        return cls(n, _expr_fn(exprs, coords), coords=coords, exprs=exprs, **kw)

    @classmethod
    def from_polynomials(cls, polys, **kw) -> "ChartMetric":
        flat = [p for row in polys for p in row]
        dim = len(polys)
        return cls(dim, lambda xs: [p(xs) for p in flat], **kw)

    def jet(self, point, order: int) -> Jet:
        return self._field.jet(point, order)

    def at(self, point) -> np.ndarray:
        return self.jet(point, 0).value

    def partials(self, point, k: int) -> np.ndarray:
        """Exact k-th coordinate partials of the components; shape (..., n, n, n^k)."""
        return self.jet(point, k).partials(k)

    def symbolic_partial(self, i: int, j: int, wrt: Sequence[int]) -> ex.Expr:
        return self._field.symbolic_partial((i, j), wrt)

    def christoffel(self, point) -> np.ndarray:
        """Gamma^c_{ab} (axes c, a, b) at a batch of points.

        Closed-form metrics evaluate their differentiated expressions directly,
        which is much cheaper than building jets inside an ODE right-hand side.
        """
        g, dg = self._g_dg(point)
        return _gamma_from(g, dg)

    def geodesic_acceleration(self, point, u) -> np.ndarray:
        """``-Gamma^c_{ab} u^a u^b`` at a batch of points, with one linear solve per point."""
        g, dg = self._g_dg(point)
        u = np.asarray(u, dtype=float)
        n = self.dim
        uu = (u[..., :, None] * u[..., None, :]).reshape(u.shape[:-1] + (n * n, 1))
        flat = dg.reshape(dg.shape[:-3] + (n, n * n))
        half = (flat @ uu)[..., 0]  # u^a u^b d_c g_ab
        dir_ = np.einsum("...c,...cab->...ab", u, dg)
        low = np.einsum("...ab,...b->...a", dir_, u) - 0.5 * half
        return -np.linalg.solve(g, low[..., None])[..., 0]

    def _g_dg(self, point):
        point = np.asarray(point, dtype=float)
        if self.exprs is None:
            return self.at(point), self.jet(point, 1).d().value
        n = self.dim
        if not hasattr(self, "_dexprs"):
            self._dexprs = [self.symbolic_partial(a, b, [c]) for c in range(n) for a in range(n)
                            for b in range(n)]
        env = {name: point[..., i] for i, name in enumerate(self.coords)}
        batch = point.shape[:-1]
        g = _fill(self.exprs, env, batch).reshape(batch + (n, n))
        dg = _fill(self._dexprs, env, batch).reshape(batch + (n, n, n))
        return g, dg

    def check(self, point, det_floor: float = 1e-12) -> np.ndarray:
        """Validate invertibility and (if declared) Lorentzian signature; return g."""
        g = np.asarray(self.at(point))
        det = np.linalg.det(g)
        bad = np.abs(det) <= det_floor
        if np.any(bad):
            idx = np.argwhere(np.atleast_1d(bad))[0]
            raise SingularMetricError(float(np.atleast_1d(det)[idx[0]]), point)
        if self.lorentzian:
            neg = (np.linalg.eigvalsh(g) < 0).sum(axis=-1)
            if np.any(neg != 1):
                raise StructuralError(f"metric {self.name!r} is not Lorentzian at {point}")
        return g

    def fd_partials(self, point, h: float = 1e-3) -> np.ndarray:
        """Fourth-order central-difference first partials (cross-check path only)."""
        point = np.asarray(point, dtype=float)
        out = np.zeros(point.shape[:-1] + (self.dim, self.dim, self.dim))
        w = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}
        for a in range(self.dim):
            for s, c in w.items():
                q = point.copy()
                q[..., a] += s * h
                out[..., a] += c * self.at(q) / h
        return out


def random_polynomial_metric(dim: int, rng: np.random.Generator, degree: int = 3,
                             scale: float = 0.15, name: str = "random") -> ChartMetric:
    """Flat Minkowski plus a small random symmetric polynomial perturbation."""
    eta = np.diag([-1.0] + [1.0] * (dim - 1))
    polys = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i, dim):
            p = Polynomial.random(dim, degree, rng, scale)
            p.terms[(0,) * dim] = p.terms.get((0,) * dim, 0.0) + eta[i, j]
            polys[i][j] = polys[j][i] = p
    return ChartMetric.from_polynomials(polys, name=name)


def random_vector_field(dim: int, rng: np.random.Generator, degree: int = 3, scale: float = 1.0) -> TensorFieldNum:
    return TensorFieldNum.from_polynomials([Polynomial.random(dim, degree, rng, scale) for _ in range(dim)], (True,))


def sample_points(metric: ChartMetric, rng: np.random.Generator, count: int, radius: float = 0.5,
                  det_floor: float = 0.1, max_tries: int = 10000) -> np.ndarray:
    """Rejection-sample chart points with |det g| >= det_floor and the declared signature."""
    pts = []
    tries = 0
    while len(pts) < count:
        tries += 1
        if tries > max_tries:
            raise SingularMetricError(0.0, "no admissible sample point found")
        p = rng.uniform(-radius, radius, metric.dim)
        g = metric.at(p)
        if abs(np.linalg.det(g)) < det_floor:
            continue
        if metric.lorentzian and (np.linalg.eigvalsh(g) < 0).sum() != 1:
            continue
        pts.append(p)
    return np.array(pts)


def _fill(exprs, env: dict, batch: tuple[int, ...]) -> np.ndarray:
    out = np.empty(batch + (len(exprs),))
    for k, e in enumerate(exprs):
        out[..., k] = e.evaluate(env)
    return out


def _gamma_from(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Christoffel symbols from g_ab and d_c g_ab (axes c, a, b)."""
    n = g.shape[-1]
    low = 0.5 * (np.swapaxes(dg, -3, -2) + np.moveaxis(dg, -3, -1) - dg)
    gam = np.linalg.inv(g) @ low.reshape(low.shape[:-2] + (n * n,))
    return gam.reshape(low.shape)
