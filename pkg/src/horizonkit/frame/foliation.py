"""Null geodesic foliation of a one-sided (or two-sided) slab and the propagated frame.

Fibers are integrated with fixed-step RK4.  The frame vectors V and e_i are
transported by pushing them forward with the flow map, whose derivative along
the horizon is taken with fourth-order central differences of neighbouring
fibers; this is exactly Lie transport, ``[dt, e] = 0``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError
from ..geometry.fields import ChartMetric
from .horizon import HorizonFrame, HorizonLocus, horizon_frame, maxabs

FD1 = ((-2, 1.0 / 12), (-1, -8.0 / 12), (1, 8.0 / 12), (2, -1.0 / 12))
STEP = 0.005
GEODESIC_TOL = 1e-8
FRAME_TOL = 1e-8
BRACKET_TOL = 1e-6


def christoffel(metric: ChartMetric, x: np.ndarray) -> np.ndarray:
    return metric.christoffel(x)


def _rhs(metric, x, u):
    return u, metric.geodesic_acceleration(x, u)


def rk4_geodesics(metric: ChartMetric, x0: np.ndarray, u0: np.ndarray, t_end: float, steps: int):
    """Fixed-step RK4 for ``x'' = -Gamma(x', x')``; returns times, positions, velocities."""
    x = np.array(x0, dtype=float)
    u = np.array(u0, dtype=float)
    h = t_end / steps if steps else 0.0
    xs, us = [x.copy()], [u.copy()]
    for _ in range(steps):
        k1x, k1u = _rhs(metric, x, u)
        k2x, k2u = _rhs(metric, x + 0.5 * h * k1x, u + 0.5 * h * k1u)
        k3x, k3u = _rhs(metric, x + 0.5 * h * k2x, u + 0.5 * h * k2u)
        k4x, k4u = _rhs(metric, x + h * k3x, u + h * k3u)
        x = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        u = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        xs.append(x.copy())
        us.append(u.copy())
    return np.linspace(0.0, t_end, steps + 1), np.stack(xs), np.stack(us)


def _time_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central difference along axis 0 (interior samples only)."""
    return (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)


@dataclass
class NullFoliation:
    locus: HorizonLocus
    hframe: HorizonFrame
    epsilon: float
    steps: int
    times: np.ndarray
    X: np.ndarray  # (S+1, N, n+1)
    U: np.ndarray  # (S+1, N, n+1), the fiber tangent dt
    checks: dict = field(default_factory=dict)

    @property
    def spec(self):
        return self.locus.spec

    def chart_point(self, t: float, j: int = 0) -> np.ndarray:
        """Chart point of null time ``t`` on fiber ``j`` (nearest sample)."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.X[k, j]


def _inside(spec, X: np.ndarray) -> np.ndarray:
    lo, hi = spec.transverse_range()
    tc = X[..., spec.horizon_index]
    return (tc >= lo) & (tc <= hi)


def _steps_for(epsilon: float) -> int:
    return max(8, int(math.ceil(abs(epsilon) / STEP)))


def richardson_ratio(metric, x0, u0, epsilon: float, steps: int) -> float | None:
    """Ratio of successive RK4 differences under step halving (16 for 4th order).

    ``None`` means the coarse and fine solutions already agree to rounding,
    which happens when the fibers are straight lines in the chart.
    """
    ends = [rk4_geodesics(metric, x0, u0, epsilon, s)[1][-1] for s in (steps, 2 * steps, 4 * steps)]
    d1 = np.abs(ends[0] - ends[1]).max()
    d2 = np.abs(ends[1] - ends[2]).max()
    if d1 < 1e-13:
        return None
    return float(d1 / max(d2, 1e-300))


def flow_foliation(locus: HorizonLocus, epsilon: float = 0.5, steps: int | None = None,
                   hframe: HorizonFrame | None = None, orientation: int = 1) -> NullFoliation:
    """Integrate the null geodesics with initial tangent L from every grid point.

    A negative ``epsilon`` flows to the extension side (null time in [epsilon, 0]).
    """
    spec = locus.spec
    hf = horizon_frame(spec, locus.points, orientation=orientation) if hframe is None else hframe
    steps = _steps_for(epsilon) if steps is None else steps
    if epsilon == 0.0:
        steps = 0
    if epsilon < 0 and not spec.extends:
        raise ValueError(f"{spec.name} does not extend across the horizon")
    times, X, U = rk4_geodesics(spec.metric, hf.P, hf.L, epsilon, steps)
    ok = np.all(_inside(spec, X), axis=1)
    if not ok.all():
        last = int(np.argmin(ok)) - 1
        if last < 1:
            raise GeometryError("fibers leave the chart domain immediately")
        warnings.warn(f"fibers leave the chart domain; slab truncated to t = {times[last]:.4g}")
        times, X, U = times[: last + 1], X[: last + 1], U[: last + 1]
        epsilon, steps = float(times[-1]), last
    fol = NullFoliation(locus, hf, epsilon, steps, times, X, U)
    fol.checks = foliation_checks(fol)
    return fol


def foliation_checks(fol: NullFoliation) -> dict:
    spec = fol.spec
    g = spec.metric.at(fol.X)
    null = maxabs(np.einsum("...a,...ab,...b->...", fol.U, g, fol.U))
    out = {"null": null}
    if fol.steps >= 4:
        h = fol.times[1] - fol.times[0]
        acc = _time_derivative(fol.U, h)
        gam = christoffel(spec.metric, fol.X[2:-2])
        out["geodesic"] = maxabs(acc + np.einsum("...cab,...a,...b->...c", gam, fol.U[2:-2], fol.U[2:-2]))
        sub = slice(0, min(16, fol.X.shape[1]))
        out["richardson_ratio"] = richardson_ratio(spec.metric, fol.X[0, sub], fol.U[0, sub],
                                                   fol.epsilon, max(4, fol.steps // 4))
    return out


@dataclass
class AdaptedFrame:
    """Lie-propagated frame (dt, V, e_2..e_n) sampled on the slab."""

    foliation: NullFoliation
    vectors: np.ndarray  # (S+1, N, n+1 frame index, n+1 chart components)
    gram: np.ndarray  # (S+1, N, n+1, n+1) frame components of g
    checks: dict = field(default_factory=dict)

    @property
    def V(self) -> np.ndarray:
        return self.vectors[..., 1, :]

    def table(self) -> dict:
        """The slab part of the frame table (values that must hold for all t)."""
        G = self.gram
        inv = np.linalg.inv(G)
        return {
            "g00": maxabs(G[..., 0, 0]),
            "g01_plus_1": maxabs(G[..., 0, 1] + 1.0),
            "g0i": maxabs(G[..., 0, 2:]),
            "g1i_at_0": maxabs(G[0, :, 1, 2:]),
            "ginv11": maxabs(inv[..., 1, 1]),
            "ginv01_plus_1": maxabs(inv[..., 0, 1] + 1.0),
            "gEE_at_0_minus_identity": maxabs(G[0, :, 2:, 2:] - np.eye(G.shape[-1] - 2)),
        }


def _pushforward(fol: NullFoliation, directions: list[np.ndarray], h: float):
    """Flow-map derivatives along horizon directions, with their dt-derivatives.

    All offset fibers are integrated in one batch.
    """
    spec = fol.spec
    hf = fol.hframe
    starts = []
    for d in directions:
        d_h = d[..., spec.horizon_coords]
        for s, _ in FD1:
            off = horizon_frame(spec, hf.Y + s * h * d_h, scale=hf.scale, dropped=hf.dropped)
            starts.append((off.P, off.L))
    P = np.concatenate([p for p, _ in starts])
    L = np.concatenate([l for _, l in starts])
    _, X, U = rk4_geodesics(spec.metric, P, L, fol.epsilon, fol.steps)
    N = hf.Y.shape[0]
    X = X.reshape(X.shape[0], len(directions), len(FD1), N, -1)
    U = U.reshape(X.shape)
    w = np.array([w for _, w in FD1])
    vec = np.einsum("s,tdsnc->dtnc", w, X) / h
    dU = np.einsum("s,tdsnc->dtnc", w, U) / h
    return vec, dU


def propagate_frame(fol: NullFoliation, h: float = 1e-3) -> AdaptedFrame:
    """Push V and the E basis forward along the fibers; check the frame table on the slab."""
    hf = fol.hframe
    columns = [fol.U]
    bracket = 0.0
    dt = fol.times[1] - fol.times[0] if fol.steps else 0.0
    dirs = [hf.V] + [hf.E[..., i, :] for i in range(hf.E.shape[-2])]
    vecs, dUs = _pushforward(fol, dirs, h)
    for vec, dU in zip(vecs, dUs):
        columns.append(vec)
        if fol.steps >= 4:
            bracket = max(bracket, maxabs(_time_derivative(vec, dt) - dU[2:-2]))
    vectors = np.stack(columns, axis=-2)
    g = fol.spec.metric.at(fol.X)
    gram = np.einsum("...ia,...ab,...jb->...ij", vectors, g, vectors)
    frame = AdaptedFrame(fol, vectors, gram)
    det = np.abs(np.linalg.det(vectors)).min()
    frame.checks = {"lie_bracket": bracket, "frame_det_min": float(det)}
    if fol.spec.killing is not None:
        W = fol.spec.killing.at(fol.X)
        frame.checks["propagated_V_minus_killing"] = maxabs(frame.V - W)
    return frame
