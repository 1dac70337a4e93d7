"""Transverse jets at the horizon in the adapted coordinates (t, y).

Along each null fiber the chart map ``Phi(t, y)`` is an exact Taylor series in
``t`` (see :mod:`.series`).  Derivatives along the horizon coordinates ``y``
use sixth-order central stencils over neighbouring fibers.  From these we assemble the
pulled-back metric ``G = DPhi^T g(Phi) DPhi`` and its partials as series in
``t``, which is all that is needed for ``(nabla_t)^k`` of a 2-tensor at t = 0.

In these coordinates the propagated frame has constant components:
``e_0 = (1, 0, ..)``, ``V = (0, V^j(y))`` and ``e_i = (0, e_i^j(y))``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .. import expr as ex
from ..errors import StructuralError
from ..geometry.curvature import LocalGeometry
from ..geometry.jets import Jet, jet_space
from . import series as S
from .horizon import HorizonFrame, horizon_frame, maxabs

# Sixth-order central stencils; with h = 1e-2 truncation (~h^6) and rounding
# (~eps / h^2) both stay near 1e-12 for second derivatives.
H = 1e-2
FD1 = ((-3, -1.0 / 60), (-2, 9.0 / 60), (-1, -45.0 / 60), (1, 45.0 / 60), (2, -9.0 / 60), (3, 1.0 / 60))
FD2 = ((-3, 2.0 / 180), (-2, -27.0 / 180), (-1, 270.0 / 180), (0, -490.0 / 180), (1, 270.0 / 180),
       (2, -27.0 / 180), (3, 2.0 / 180))
CHUNK_FIBERS = 24000


def stencil_offsets(n: int) -> list[tuple[int, ...]]:
    """Integer offsets (in units of the step) of all fibers used around a point."""
    offs = [(0,) * n]
    for j in range(n):
        for s, _ in FD1:
            o = [0] * n
            o[j] = s
            offs.append(tuple(o))
    for j, k in itertools.combinations(range(n), 2):
        for (s, _), (r, _) in itertools.product(FD1, FD1):
            o = [0] * n
            o[j], o[k] = s, r
            offs.append(tuple(o))
    return offs


class _Stencil:
    """First and second y-derivatives of arrays sampled on the stencil offsets (axis 0)."""

    def __init__(self, n: int, h: float):
        self.n = n
        self.h = h
        self.offsets = stencil_offsets(n)
        self.index = {o: i for i, o in enumerate(self.offsets)}

    def _at(self, f, **shift):
        o = [0] * self.n
        for j, s in shift.items():
            o[int(j[1:])] = s
        return f[self.index[tuple(o)]]

    def d1(self, f: np.ndarray, j: int) -> np.ndarray:
        return sum(w * self._at(f, **{f"j{j}": s}) for s, w in FD1) / self.h

    def d2(self, f: np.ndarray, j: int, k: int) -> np.ndarray:
        if j == k:
            return sum(w * self._at(f, **{f"j{j}": s}) for s, w in FD2) / self.h ** 2
        return sum(w * v * self._at(f, **{f"j{j}": s, f"j{k}": r})
                   for (s, w), (r, v) in itertools.product(FD1, FD1)) / self.h ** 2


def _sandwich(a: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Series of ``a^T g b`` for matrix series with axes (chart, adapted)."""
    ga = S.mul("...ca,...cd->...ad", a, g)
    return S.mul("...ad,...db->...ab", ga, b)


def _eval_series(e: ex.Expr, env: dict, q: int, batch: int) -> np.ndarray:
    v = e.evaluate(env)
    out = np.zeros((q + 1, batch))
    if isinstance(v, Jet):
        out[:] = v.c
    else:
        out[0] = v
    return out


@dataclass
class AdaptedJets:
    """Series data in adapted coordinates at every horizon grid point.

    ``G[m]`` and ``dG[m]`` are the t-Taylor coefficients of ``G_ab`` and
    ``d_c G_ab`` (axes c, a, b); ``gamma_t[m]`` those of ``Gamma^c_{t a}``.
    """

    spec: object
    hframe: HorizonFrame
    order: int
    G: np.ndarray  # (Q+1, N, n1, n1)
    dG: np.ndarray  # (Q+1, N, n1, n1, n1)
    gamma_t: np.ndarray  # (Q+1, N, n1, n1)
    V: np.ndarray  # (N, n1)
    dV: np.ndarray  # (N, n1, n1): d_c V^a
    F: np.ndarray  # (N, n1, n1) frame columns (dt, V, e_i)
    G2: np.ndarray  # (M, N, n1, n1) second-order jet coefficients of G at t = 0
    X: np.ndarray  # (Q+1, N, n1) chart position along each fiber
    D: np.ndarray  # (Q+1, N, n1, n1) chart Jacobian DPhi, axes (chart, adapted)
    checks: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.G.shape[-1]

    @property
    def size(self) -> int:
        return self.G.shape[1]

    # -- candidate fields ------------------------------------------------
    def generator_series(self, candidate=None) -> tuple[np.ndarray, np.ndarray]:
        """Series of ``V^a`` and ``d_c V^a``, optionally plus an adapted perturbation."""
        q = self.order
        N, n1 = self.size, self.dim
        v = np.zeros((q + 1, N, n1))
        dv = np.zeros((q + 1, N, n1, n1))
        v[0] = self.V
        dv[0] = self.dV
        if candidate is not None:
            names = self.spec.adapted_names
            c = np.zeros((q + 1, N))
            if q >= 1:
                c[1] = 1.0
            env = {"t": Jet(c, 1, q)}
            env.update({name: self.hframe.Y[:, j] for j, name in enumerate(names[1:])})
            for a, e in enumerate(candidate):
                v[..., a] += _eval_series(e, env, q, N)
                for cidx, name in enumerate(names):
                    dv[..., cidx, a] += _eval_series(e.diff(name), env, q, N)
        return v, dv

    def lie_series(self, candidate=None) -> np.ndarray:
        """Series of ``(L_V g)_ab`` in adapted components."""
        v, dv = self.generator_series(candidate)
        G = self.G
        out = S.mul("...c,...cab->...ab", v, self.dG)
        out += S.mul("...cb,...ac->...ab", G, dv)
        out += S.mul("...ac,...bc->...ab", G, dv)
        return out

    def nabla_t(self, T: np.ndarray) -> np.ndarray:
        """One covariant t-derivative of a covariant 2-tensor series (order drops by one)."""
        gam = self.gamma_t[: S.order_of(T)]
        out = S.deriv(T)
        out -= S.mul("...ca,...cb->...ab", gam, T[:-1])
        out -= S.mul("...cb,...ac->...ab", gam, T[:-1])
        return out

    def nabla_t_powers(self, T: np.ndarray, kmax: int) -> list[np.ndarray]:
        """Series of ``(nabla_t)^k T`` for k = 0..kmax."""
        if kmax > S.order_of(T):
            raise StructuralError(f"jets only reach order {S.order_of(T)}")
        out = [T]
        for _ in range(kmax):
            T = self.nabla_t(T)
            out.append(T)
        return out

    def pull_back(self, tensor) -> np.ndarray:
        """Adapted-component series of a covariant 2-tensor field given by chart expressions."""
        env = dict(zip(self.spec.coords, S.as_jets(self.X)))
        n1 = self.dim
        comps = S.from_values([e.evaluate(env) for e in tensor.exprs], self.X, (n1, n1))
        return _sandwich(self.D, comps, self.D)

    def frame_components(self, T0: np.ndarray) -> np.ndarray:
        return np.einsum("...ai,...ab,...bj->...ij", self.F, T0, self.F)

    # -- frame table -----------------------------------------------------
    def frame_gram(self) -> np.ndarray:
        return np.einsum("...ai,m...ab,...bj->m...ij", self.F, self.G, self.F)

    def table_values(self) -> dict:
        Fr = self.frame_gram()
        inv = S.matinv(Fr)
        return {
            "dt_g11": Fr[1][..., 1, 1],
            "dt_g00inv": inv[1][..., 0, 0],
            "g11_at_0": Fr[0][..., 1, 1],
            "gram": Fr,
        }

    # -- second-order jets -----------------------------------------------
    def metric_jet(self) -> Jet:
        return Jet(self.G2, self.dim, 2, 2)

    def generator_jet(self, candidate=None) -> Jet:
        """Order-2 jet of V (plus perturbation) in the adapted coordinates at t = 0."""
        spec = self.spec
        n1 = self.dim
        pt = np.concatenate([np.zeros((self.size, 1)), self.hframe.Y], axis=-1)
        xs = Jet.coordinates(pt, 2)
        env = {spec.coords[spec.horizon_index]: 0.0}
        env.update({spec.coords[c]: xs[j + 1] for j, c in enumerate(spec.horizon_coords)})
        gen = spec.generator.exprs
        comps = [gen[c].evaluate(env) * self.hframe.scale for c in spec.horizon_coords]
        items = [Jet.constant(0.0, xs[0])] + [c if isinstance(c, Jet) else Jet.constant(c, xs[0]) for c in comps]
        if candidate is not None:
            aenv = dict(zip(spec.adapted_names, xs))
            for a, e in enumerate(candidate):
                items[a] = items[a] + e.evaluate(aenv)
        return Jet.stack(items, (n1,))

    def box_generator(self, candidate=None) -> np.ndarray:
        """``Box V`` at t = 0, in frame components."""
        geo = LocalGeometry.from_jet(self.metric_jet())
        b = geo.box(self.generator_jet(candidate), (True,)).value
        return np.linalg.solve(self.F, b[..., None])[..., 0]


def _chunk_data(spec, hf: HorizonFrame, Y: np.ndarray, K: int, st: _Stencil):
    n = Y.shape[-1]
    n1 = n + 1
    hc = spec.horizon_coords
    offs = np.array(st.offsets, dtype=float)
    F = len(offs)
    C = len(Y)
    Yall = (Y[None] + st.h * offs[:, None, :]).reshape(-1, n)
    fr = horizon_frame(spec, Yall, scale=hf.scale, dropped=hf.dropped)
    X = S.geodesic_series(spec.metric, fr.P, fr.L, K).reshape(K + 1, F, C, n1)
    Xs = np.moveaxis(X, 1, 0)  # (F, K+1, C, n1)
    base = Xs[0]
    g, dgc = S.metric_series(spec.metric, base)
    Q = K - 2
    # The t^0 coefficient is (0, y) exactly; difference only the rest to avoid
    # cancellation in the absolute coordinates.
    Xd = Xs.copy()
    Xd[:, 0] = 0.0
    d1 = []
    for j in range(n):
        dj = st.d1(Xd, j)
        dj[0, :, hc[j]] = 1.0
        d1.append(dj)
    # Jacobian columns: dt Phi, d_j Phi
    cols = [S.deriv(base)] + [d[:K] for d in d1]
    D = np.stack(cols, axis=-1)  # (K, C, chart, adapted)
    dD = []
    for gma in range(n1):
        if gma == 0:
            dD.append(S.deriv(D))
        else:
            j = gma - 1
            cc = [S.deriv(d1[j])[:K - 1]] + [st.d2(Xd, j, k)[:K - 1] for k in range(n)]
            dD.append(np.stack(cc, axis=-1))
    D = D[: Q + 1]
    g = g[: Q + 1]
    G = _sandwich(D, g, D)
    dG = []
    for gma in range(n1):
        dg_dir = S.mul("...cab,...c->...ab", dgc[: Q + 1], D[..., gma])
        t = _sandwich(dD[gma], g, D) + _sandwich(D, g, dD[gma]) + _sandwich(D, dg_dir, D)
        dG.append(t)
    dG = np.stack(dG, axis=2)  # (Q+1, C, c, a, b)
    # Christoffel symbols Gamma^c_{t a}
    low = 0.5 * (dG[:, :, 0] + np.swapaxes(dG[..., 0], -1, -2) - dG[..., 0, :])
    gam_t = S.mul("...cd,...da->...ca", S.matinv(G), low)
    # horizon data at t = 0
    base_fr = slice(0, C)
    V = np.zeros((C, n1))
    V[:, 1:] = fr.V[base_fr][:, hc]
    dV = np.zeros((C, n1, n1))
    env = {spec.coords[spec.horizon_index]: 0.0}
    env.update({spec.coords[c]: Y[:, j] for j, c in enumerate(hc)})
    gen = spec.generator.exprs
    for k, ck in enumerate(hc):
        for j, cj in enumerate(hc):
            dV[:, k + 1, j + 1] = gen[cj].diff(spec.coords[ck]).evaluate(env) * hf.scale
    Fm = np.zeros((C, n1, n1))
    Fm[:, 0, 0] = 1.0
    Fm[:, 1:, 1] = V[:, 1:]
    E = fr.E[base_fr]
    for i in range(E.shape[1]):
        Fm[:, 1:, 2 + i] = E[:, i][:, hc]
    # second-order jet of G at t = 0
    eye = np.eye(n1)[:, 1:]
    D0 = np.concatenate([X[1][..., None], np.broadcast_to(eye, (F, C, n1, n))], axis=-1)
    g0 = spec.metric.at(X[0])
    G0 = np.einsum("...ca,...cd,...db->...ab", D0, g0, D0)  # (F, C, n1, n1)
    space = jet_space(n1, 2)
    G2 = np.zeros((space.size(2), C, n1, n1))
    for m_i, alpha in enumerate(space.monomials):
        a = list(alpha)
        if sum(a) == 0:
            G2[m_i] = G[0]
        elif sum(a) == 1:
            G2[m_i] = dG[0, :, a.index(1)]
        elif a[0] == 2:
            G2[m_i] = G[2]
        elif a[0] == 1:
            j = a.index(1, 1)
            G2[m_i] = dG[1, :, j]
        else:
            idx = [i for i, x in enumerate(a) for _ in range(x)]
            j, k = idx[0] - 1, idx[1] - 1
            d2 = st.d2(G0, j, k)
            G2[m_i] = d2 / 2.0 if j == k else d2
    checks = {"dt_partial_consistency": maxabs(dG[:-1, :, 0] - S.deriv(G))}
    return dict(G=G, dG=dG, gamma_t=gam_t, V=V, dV=dV, F=Fm, G2=G2, X=base[: Q + 1], D=D), checks


def adapted_jets(spec, Y: np.ndarray, order: int, hframe: HorizonFrame | None = None,
                 h: float = H) -> AdaptedJets:
    """Series data good for ``(nabla_t)^k`` with ``k <= order`` at the points ``Y``.

    The series always reach at least order 2, as needed for ``Box V``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    hf = horizon_frame(spec, Y) if hframe is None else hframe
    n = Y.shape[-1]
    st = _Stencil(n, h)
    order = max(order, 2)  # the second-order metric jet needs G up to t^2
    K = order + 2
    step = max(1, CHUNK_FIBERS // len(st.offsets))
    parts, checks = [], {}
    for lo in range(0, len(Y), step):
        data, c = _chunk_data(spec, hf, Y[lo: lo + step], K, st)
        parts.append(data)
        for key, val in c.items():
            checks[key] = max(checks.get(key, 0.0), val)
    merged = {}
    for key in parts[0]:
        axis = 0 if key in ("V", "dV", "F") else 1
        merged[key] = np.concatenate([p[key] for p in parts], axis=axis)
    return AdaptedJets(spec, hf, order, checks=checks, **merged)


def factorial(k: int) -> int:
    return math.factorial(k)
