"""Numerical tensor calculus on a chart.

Conventions: ``R_{abc}^d w_d = (nabla_a nabla_b - nabla_b nabla_a) w_c``,
``R_{ac} = R_{abc}^b``, ``Box = -g^{cd} nabla_c nabla_d`` and
``Riem(u)_{ab} = R_a^c_b^d u_{cd}``.  Derivative indices are always placed
first: ``nabla(T)[a, ...] = nabla_a T_{...}``.
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..errors import SingularMetricError, UsageError
from .fields import ChartMetric, TensorFieldNum
from .jets import Jet, contract, einsum1, matinv

L = string.ascii_lowercase


class LocalGeometry:
    """Jets of the metric and its curvature around a (batch of) point(s).

    ``order`` is the jet order of the metric; Christoffels carry ``order-1``
    and curvature ``order-2``.
    """

    def __init__(self, metric: ChartMetric, point, order: int, det_floor: float = 1e-12):
        self.metric = metric
        self.point = np.asarray(point, dtype=float)
        self.order = order
        self.g = metric.jet(self.point, order)
        det = np.linalg.det(self.g.value)
        if np.any(np.abs(det) <= det_floor):
            raise SingularMetricError(float(np.min(np.abs(det))), self.point)
        self.dim = metric.dim

    @classmethod
    def from_jet(cls, g: Jet, det_floor: float = 1e-12) -> "LocalGeometry":
        """Geometry of a metric given directly by its jet (no chart metric attached)."""
        det = np.linalg.det(g.value)
        if np.any(np.abs(det) <= det_floor):
            raise SingularMetricError(float(np.min(np.abs(det))), None)
        self = cls.__new__(cls)
        self.metric = None
        self.point = None
        self.order = g.order
        self.g = g
        self.dim = g.dim
        return self

    @cached_property
    def ginv(self) -> Jet:
        return matinv(self.g)

    @cached_property
    def gamma(self) -> Jet:
        """Gamma^c_{ab} with tensor axes (c, a, b)."""
        dg = self.g.d()  # (k, i, j) = d_k g_ij
        low = (einsum1("adb", "dab", dg) + einsum1("bda", "dab", dg) - dg) * 0.5
        return contract("cd", "dab", "cab", self.ginv, low)

    @cached_property
    def riemann_ud(self) -> Jet:
        """R_{abc}^d with axes (a, b, c, d)."""
        gam = self.gamma
        dgam = gam.d()  # (k, d, a, c) = d_k Gamma^d_{ac}
        t1 = einsum1("bdac", "abcd", dgam)
        t2 = einsum1("adbc", "abcd", dgam)
        t3 = contract("fac", "dbf", "abcd", gam, gam)
        t4 = contract("fbc", "daf", "abcd", gam, gam)
        return t1 - t2 + t3 - t4

    @cached_property
    def riemann(self) -> Jet:
        """Fully covariant R_{abcd}."""
        return contract("abce", "ed", "abcd", self.riemann_ud, self.g)

    @cached_property
    def ricci(self) -> Jet:
        return self.riemann_ud.trace(1, 3)

    @cached_property
    def scalar(self) -> Jet:
        return contract("ab", "ab", "", self.ginv, self.ricci)

    # -- covariant calculus ----------------------------------------------
    def nabla(self, t: Jet, up: tuple[bool, ...] | None = None) -> Jet:
        """Covariant derivative; the new (covariant) index is prepended."""
        rank = t.rank
        up = (False,) * rank if up is None else tuple(up)
        if len(up) != rank:
            raise UsageError("variance tuple does not match tensor rank")
        out = t.d()
        gam = self.gamma
        slots = L[1:rank + 1]
        for j in range(rank):
            if up[j]:
                spec_t = slots[:j] + "z" + slots[j + 1:]
                out = out + contract(slots[j] + "az", spec_t, "a" + slots, gam, t)
            else:
                spec_t = slots[:j] + "z" + slots[j + 1:]
                out = out - contract("za" + slots[j], spec_t, "a" + slots, gam, t)
        return out

    def nabla_n(self, t: Jet, n: int, up=None) -> list[Jet]:
        """[t, nabla t, nabla^2 t, ...] up to n derivatives (variances extend with lower slots)."""
        up = (False,) * t.rank if up is None else tuple(up)
        out = [t]
        for _ in range(n):
            t = self.nabla(t, up)
            up = (False,) + up
            out.append(t)
        return out

    def lower(self, v: Jet, slot: int = 0) -> Jet:
        s = L[: v.rank]
        spec_out = s[:slot] + "z" + s[slot + 1:]
        return contract("z" + s[slot], s, spec_out, self.g, v)

    def raise_(self, w: Jet, slot: int = 0) -> Jet:
        s = L[: w.rank]
        spec_out = s[:slot] + "z" + s[slot + 1:]
        return contract("z" + s[slot], s, spec_out, self.ginv, w)

    def box(self, t: Jet, up=None) -> Jet:
        """-g^{cd} nabla_c nabla_d t."""
        up = (False,) * t.rank if up is None else tuple(up)
        d2 = self.nabla(self.nabla(t, up), (False,) + up)
        s = L[2: 2 + t.rank]
        return -contract("ab", "ab" + s, s, self.ginv, d2)


def lie_derivative(x: Jet, t: Jet, up: tuple[bool, ...]) -> Jet:
    """Coordinate-formula Lie derivative of tensor jet ``t`` along vector jet ``x``.

    Uses only partial derivatives, so it is independent of the Christoffel path.
    """
    rank = t.rank
    s = L[1:rank + 1]
    out = contract("a", "a" + s, s, x, t.d())
    dx = x.d()  # (a, c) = d_a x^c
    for j in range(rank):
        spec_t = s[:j] + "z" + s[j + 1:]
        if up[j]:
            out = out - contract("z" + s[j], spec_t, s, dx, t)
        else:
            out = out + contract(s[j] + "z", spec_t, s, dx, t)
    return out


@dataclass
class CurvaturePack:
    christoffel: np.ndarray  # Gamma^c_{ab}, axes (c, a, b)
    riemann: np.ndarray  # R_{abc}^d
    ricci: np.ndarray  # R_{ab}

    def symmetry_defects(self, g: np.ndarray) -> dict[str, float]:
        low = np.einsum("...abce,...ed->...abcd", self.riemann, g)
        scale = max(np.abs(low).max(), 1e-300)
        return {
            "gamma_lower_pair": float(np.abs(self.christoffel - np.swapaxes(self.christoffel, -1, -2)).max()),
            "first_pair": float(np.abs(low + np.swapaxes(low, -4, -3)).max() / scale),
            "second_pair": float(np.abs(low + np.swapaxes(low, -2, -1)).max() / scale),
            "pair_exchange": float(np.abs(low - np.moveaxis(low, (-4, -3), (-2, -1))).max() / scale),
            "ricci_symmetry": float(np.abs(self.ricci - np.swapaxes(self.ricci, -1, -2)).max()),
        }


def curvature_pack(m: ChartMetric, p) -> CurvaturePack:
    geo = LocalGeometry(m, p, 2)
    return CurvaturePack(geo.gamma.value, geo.riemann_ud.value, geo.ricci.value)


def cov_derivative(m: ChartMetric, field: TensorFieldNum, p) -> np.ndarray:
    geo = LocalGeometry(m, p, 1)
    return geo.nabla(field.jet(p, 1), field.up).value


def lie_derivative_metric(m: ChartMetric, v: TensorFieldNum, p) -> np.ndarray:
    """(L_V g)_{ab} = nabla_a V_b + nabla_b V_a."""
    geo = LocalGeometry(m, p, 1)
    vl = geo.lower(v.jet(p, 1))
    dv = geo.nabla(vl).value
    return dv + np.swapaxes(dv, -1, -2)


def box_vector(m: ChartMetric, v: TensorFieldNum, p) -> np.ndarray:
    if v.rank != 1:
        raise UsageError("box_vector expects a vector field")
    geo = LocalGeometry(m, p, 2)
    return geo.box(v.jet(p, 2), v.up).value


def box_two_tensor(m: ChartMetric, u: TensorFieldNum, p) -> np.ndarray:
    if u.rank != 2:
        raise UsageError("box_two_tensor expects a 2-tensor field")
    geo = LocalGeometry(m, p, 2)
    return geo.box(u.jet(p, 2), u.up).value


def box_frame_form(m: ChartMetric, field: TensorFieldNum, frame: list[TensorFieldNum], p) -> np.ndarray:
    """-g^{ab}(nabla_{e_a} nabla_{e_b} u - nabla_{nabla_{e_a} e_b} u) in a vector frame."""
    geo = LocalGeometry(m, p, 2)
    u = field.jet(p, 2)
    du = geo.nabla(u, field.up)  # order 1
    es = [e.jet(p, 2) for e in frame]
    rank = field.rank
    s = L[1:rank + 1]
    emat = np.stack([e.value for e in es], axis=-2)  # (..., alpha, component)
    gframe = np.einsum("...ai,...ij,...bj->...ab", emat, geo.g.value, emat)
    ginv_frame = np.linalg.inv(gframe)
    total = 0.0
    for a, ea in enumerate(es):
        for b, eb in enumerate(es):
            w = contract("a", "a" + s, s, eb, du)  # nabla_{e_b} u, a field
            dw = geo.nabla(w, field.up).value
            term1 = np.einsum("...a,...a" + s + "->..." + s, ea.value, dw)
            nab_e = geo.nabla(eb, (True,)).value  # (a, c) = nabla_a e_b^c
            dir_vec = np.einsum("...a,...ac->...c", ea.value, nab_e)
            term2 = np.einsum("...a,...a" + s + "->..." + s, dir_vec, du.value)
            coef = ginv_frame[..., a, b]
            coef = coef.reshape(coef.shape + (1,) * rank)
            total = total + coef * (term1 - term2)
    return -total


def divergence(m: ChartMetric, field: TensorFieldNum, p) -> np.ndarray:
    geo = LocalGeometry(m, p, 1)
    t = field.jet(p, 1)
    d = geo.nabla(t, field.up).value
    if field.rank == 1:
        if field.up[0]:
            return np.einsum("...aa->...", d)
        return np.einsum("...ab,...ab->...", geo.ginv.value, d)
    if field.rank == 2:
        if field.up[0]:
            return np.einsum("...aab->...b", d)
        return np.einsum("...ac,...acb->...b", geo.ginv.value, d)
    raise UsageError("divergence defined for rank 1 and 2 only")


def riem_action(m: ChartMetric, u: TensorFieldNum, p) -> np.ndarray:
    if u.rank != 2 or any(u.up):
        raise UsageError("riem_action expects a covariant 2-tensor")
    geo = LocalGeometry(m, p, 2)
    uu = np.einsum("...ce,...df,...ef->...cd", geo.ginv.value, geo.ginv.value, u.at(p))
    return np.einsum("...acbd,...cd->...ab", geo.riemann.value, uu)


def ric_sharp(m: ChartMetric, field: TensorFieldNum, p) -> np.ndarray:
    """Ric^#(V)^a = R^a_b V^b for vectors; Ric^#(u)_{ab} = R_a^c u_{cb} for covariant 2-tensors."""
    geo = LocalGeometry(m, p, 2)
    ric = geo.ricci.value
    ginv = geo.ginv.value
    if field.rank == 1 and field.up[0]:
        return np.einsum("...ac,...cb,...b->...a", ginv, ric, field.at(p))
    if field.rank == 2 and not any(field.up):
        return np.einsum("...ae,...ec,...cb->...ab", ric, ginv, field.at(p))
    raise UsageError("ric_sharp expects a vector or a covariant 2-tensor")


def sym(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u)
    if u.ndim < 2:
        raise UsageError("sym expects a 2-tensor")
    return 0.5 * (u + np.swapaxes(u, -1, -2))


def metric_compatibility_defect(m: ChartMetric, p) -> float:
    geo = LocalGeometry(m, p, 1)
    return float(np.abs(geo.nabla(geo.g).value).max())


# -- numeric identities --------------------------------------------------

@dataclass
class ResidualReport:
    metric: str
    point: list
    identity: str
    abs_residual: float
    rel_residual: float
    terms: dict

    def to_dict(self) -> dict:
        return {"metric": self.metric, "point": self.point, "identity": self.identity,
                "abs_residual": self.abs_residual, "rel_residual": self.rel_residual}


def identity_terms(m: ChartMetric, v: TensorFieldNum, p, which: str) -> dict[str, np.ndarray]:
    """Assemble the individual terms of the vector (A1) or Lie (A2) identity.

    Every term is returned fully covariant; the identity states that the terms
    sum to zero.
    """
    geo = LocalGeometry(m, p, 4)
    vj = v.jet(p, 4)
    vl = geo.lower(vj)
    ginv = geo.ginv
    g = geo.g
    if which == "A1":
        box_v = geo.box(vl)  # covariant
        lie = lie_derivative(vj, g, (False, False))
        div_v = geo.nabla(vj, (True,)).trace(0, 1)
        u = lie - div_v * g
        du = geo.nabla(u)
        div_u = contract("ac", "acb", "b", ginv, du)
        ric_v = contract("ba", "a", "b", geo.ricci, vj)
        return {"box_v": box_v.value, "div_term": div_u.value, "minus_ric_v": -ric_v.value}
    if which == "A2":
        lie = lie_derivative(vj, g, (False, False))  # order 3
        box_lie = geo.box(lie)
        lie_u = contract("ac", "bd", "abcd", ginv, ginv)
        lie_up = contract("abcd", "cd", "ab", lie_u, lie)
        riem_lie = contract("acbd", "cd", "ab", geo.riemann, lie_up)
        box_v_up = geo.box(vj, (True,))  # order 2 vector
        lie_box_v = lie_derivative(box_v_up, g, (False, False))
        lie_ric = lie_derivative(vj, geo.ricci, (False, False))
        ric_v_up = contract("ac", "cb", "ab", ginv, geo.ricci)
        ric_v_vec = contract("ab", "b", "a", ric_v_up, vj)
        lie_ricv_g = lie_derivative(ric_v_vec, g, (False, False))
        ric_mixed = contract("ac", "ce", "ae", geo.ricci, ginv)
        ric_lie = contract("ae", "eb", "ab", ric_mixed, lie)
        sym_ric_lie = (ric_lie + ric_lie.transpose((1, 0))) * 0.5
        return {
            "box_lie": box_lie.value,
            "minus_2riem_lie": -2.0 * riem_lie.value,
            "minus_lie_box_v": -lie_box_v.value,
            "minus_2lie_ric": -2.0 * lie_ric.value,
            "lie_ric_v_g": lie_ricv_g.value,
            "2sym_ric_lie": 2.0 * sym_ric_lie.value,
        }
    raise UsageError(f"unknown identity {which!r}")


def check_identity_numeric(m: ChartMetric, v: TensorFieldNum, p, which: str = "A1",
                           floor: float = 1e-12) -> ResidualReport:
    terms = identity_terms(m, v, p, which)
    total = sum(terms.values())
    scale = max(max(float(np.abs(t).max()) for t in terms.values()), floor)
    absres = float(np.abs(total).max())
    return ResidualReport(m.name, np.asarray(p).tolist(), which, absres, absres / scale, terms)


SWEEP_DIMS = (2, 3, 4, 3, 4)


def numeric_sweep(seed: int = 0, metrics: int = 5, points: int = 20, fields: int = 3,
                  identities=("A1", "A2")) -> dict:
    """Per-point relative residuals of the identities on seeded random polynomial metrics.

    The relative residual at a point divides by the largest single term there,
    so a point never borrows scale from its neighbours.
    """
    from .fields import random_polynomial_metric, random_vector_field, sample_points

    rng = np.random.default_rng(seed)
    rows = []
    worst = {w: 0.0 for w in identities}
    for i in range(metrics):
        dim = SWEEP_DIMS[i % len(SWEEP_DIMS)]
        m = random_polynomial_metric(dim, rng, name=f"random{i}")
        P = sample_points(m, rng, points)
        for j in range(fields):
            v = random_vector_field(dim, rng)
            for which in identities:
                terms = identity_terms(m, v, P, which)
                total = sum(terms.values())
                axes = tuple(range(1, total.ndim))
                scale = np.maximum(np.max([np.abs(t).max(axis=axes) for t in terms.values()], axis=0), 1e-12)
                rel = np.abs(total).max(axis=axes) / scale
                worst[which] = max(worst[which], float(rel.max()))
                rows.append({"metric": m.name, "dim": dim, "field": j, "identity": which,
                             "max_abs_residual": float(np.abs(total).max()),
                             "max_rel_residual": float(rel.max())})
    return {"seed": seed, "metrics": metrics, "points": points, "fields": fields,
            "max_rel_residual": worst, "runs": rows}
