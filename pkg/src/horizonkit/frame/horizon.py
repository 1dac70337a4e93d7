"""Geometry on the null hypersurface {t_chart = 0} of a catalog chart.

Everything here is pointwise: given horizon coordinates ``Y`` (shape ``(N, n)``)
the functions return chart components at the points ``(0, Y)``.  Finite
differences across the horizon reuse the same code at shifted points, so all
constructions are smooth functions of the base point.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import (DegenerateHorizonError, GeometryError, HypothesisViolation,
                      NonConstantSurfaceGravityError, OrientationError)
from ..geometry.curvature import LocalGeometry

KAPPA_TOL = 1e-8
KAPPA_FLOOR = 1e-6
GEODESIC_TOL = 1e-8
NULL_TOL = 1e-10
RANK_GAP = 1e-3


def maxabs(x) -> float:
    x = np.asarray(x)
    return float(np.abs(x).max()) if x.size else 0.0


def default_grid(n_periodic: int) -> int:
    """Points per periodic direction: 256 on a circle, 8 per direction on higher tori."""
    return 256 if n_periodic == 1 else 8


@dataclass
class HorizonLocus:
    """A uniform grid on the compact horizon {t_chart = 0}."""

    spec: object
    shape: tuple[int, ...]
    points: np.ndarray  # (N, n) horizon coordinates

    @classmethod
    def build(cls, spec, grid: int | None = None) -> "HorizonLocus":
        per = spec.horizon_periods
        m = default_grid(len(per)) if grid is None else int(grid)
        axes = [np.arange(m) * (p / m) for p in per]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([a.ravel() for a in mesh], axis=-1)
        return cls(spec, (m,) * len(per), pts)

    @property
    def size(self) -> int:
        return len(self.points)

    def chart(self, Y: np.ndarray | None = None, t_chart: float = 0.0) -> np.ndarray:
        return to_chart(self.spec, self.points if Y is None else Y, t_chart)

    def degeneracy(self) -> dict[str, float]:
        """Smallest and second-smallest |eigenvalue| of the induced form."""
        return induced_spectrum(self.spec, self.points)


def to_chart(spec, Y: np.ndarray, t_chart: float = 0.0) -> np.ndarray:
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    P = np.empty(Y.shape[:-1] + (spec.dim,))
    P[..., spec.horizon_index] = t_chart
    P[..., spec.horizon_coords] = Y
    return P


def induced_spectrum(spec, Y: np.ndarray) -> dict[str, float]:
    g = spec.metric.at(to_chart(spec, Y))
    hc = spec.horizon_coords
    h = g[..., hc, :][..., :, hc]
    ev = np.sort(np.abs(np.linalg.eigvalsh(h)), axis=-1)
    out = {"smallest": float(ev[..., 0].max())}
    out["second"] = float(ev[..., 1].min()) if ev.shape[-1] > 1 else float("inf")
    return out


def check_null_locus(spec, Y: np.ndarray) -> dict[str, float]:
    """The induced form must be degenerate in exactly one direction."""
    spec_ = induced_spectrum(spec, Y)
    if spec_["smallest"] > NULL_TOL or spec_["second"] < RANK_GAP:
        raise GeometryError(f"{{{spec.coords[spec.horizon_index]} = 0}} is not a null hypersurface "
                            f"(induced spectrum {spec_})")
    return spec_


@dataclass
class GeneratorField:
    """A generator sampled on horizon points, with its surface gravity."""

    V: np.ndarray  # (N, n+1) chart components
    kappa: np.ndarray  # (N,)
    scale: float = 1.0  # V = scale * raw generator
    residual: float = 0.0  # max |nabla_V V - kappa V|


def _nabla_vector(spec, P: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray, LocalGeometry]:
    geo = LocalGeometry(spec.metric, P, 1)
    vj = spec.generator.jet(P, 1) * scale
    return vj.value, geo.nabla(vj, (True,)).value, geo


def measure_kappa(spec, Y: np.ndarray, scale: float = 1.0) -> GeneratorField:
    """Surface gravity of ``scale * generator`` from ``nabla_V V = kappa V``."""
    P = to_chart(spec, Y)
    V, dV, _ = _nabla_vector(spec, P, scale)
    if maxabs(V[..., spec.horizon_index]) > NULL_TOL:
        raise GeometryError("generator is not tangent to the horizon")
    if np.linalg.norm(V, axis=-1).min() < KAPPA_FLOOR:
        raise DegenerateHorizonError("generator vanishes somewhere on the horizon")
    acc = np.einsum("...a,...ac->...c", V, dV)
    kappa = np.einsum("...c,...c->...", acc, V) / np.einsum("...c,...c->...", V, V)
    res = maxabs(acc - kappa[..., None] * V)
    if res > KAPPA_TOL:
        raise GeometryError(f"nabla_V V is not parallel to V (residual {res:.3e})")
    return GeneratorField(V, kappa, scale, res)


def normalize_kappa(spec, Y: np.ndarray) -> tuple[GeneratorField, GeneratorField]:
    """Rescale the raw generator to unit surface gravity.

    Returns ``(raw, normalized)``; the normalized field is re-measured.
    """
    raw = measure_kappa(spec, Y)
    k = raw.kappa
    if np.abs(k).max() < KAPPA_FLOOR:
        raise DegenerateHorizonError(f"surface gravity vanishes (max |kappa| = {np.abs(k).max():.3e})")
    dev = float(np.abs(k - k.mean()).max())
    if dev > KAPPA_TOL:
        raise NonConstantSurfaceGravityError(dev)
    kappa = float(k.mean())
    if abs(kappa) < KAPPA_FLOOR:
        raise DegenerateHorizonError(f"surface gravity {kappa:.3e} is zero")
    return raw, measure_kappa(spec, Y, 1.0 / kappa)


@dataclass
class HorizonFrame:
    """Pointwise horizon data: V, omega, E, L and diagnostics."""

    Y: np.ndarray
    P: np.ndarray
    g: np.ndarray  # (N, n+1, n+1)
    V: np.ndarray  # (N, n+1)
    omega: np.ndarray  # (N, n) on the horizon coordinate basis
    E: np.ndarray  # (N, n-1, n+1), g-orthonormal
    L: np.ndarray  # (N, n+1)
    scale: float
    dropped: int
    checks: dict = field(default_factory=dict)

    @property
    def chart_frame(self) -> np.ndarray:
        """Columns (L, V, e_2, ..., e_n) as an (N, n+1, n+1) matrix."""
        return np.concatenate([self.L[..., :, None], self.V[..., :, None],
                               np.swapaxes(self.E, -1, -2)], axis=-1)


def _pick_dropped(V_h: np.ndarray) -> int:
    """Horizon direction eliminated from the spanning set of E (largest |V| component)."""
    floor = np.abs(V_h).min(axis=0)
    j = int(np.argmax(floor))
    if floor[j] < KAPPA_FLOOR:
        raise GeometryError("no horizon coordinate direction is transverse to E everywhere")
    return j


def build_omega_E(spec, Y: np.ndarray, scale: float, dropped: int | None = None):
    """One-form omega with ``nabla_X V = omega(X) V`` and a g-orthonormal basis of ker(omega)."""
    P = to_chart(spec, Y)
    V, dV, geo = _nabla_vector(spec, P, scale)
    g = geo.g.value
    hc = spec.horizon_coords
    tc = spec.horizon_index
    n = len(hc)
    dV_h = dV[..., hc, :]  # (N, j, c) = nabla_j V^c
    second = np.einsum("...jc,...ck->...jk", dV_h, g[..., :, hc])
    sff = maxabs(second)
    if sff > GEODESIC_TOL:
        raise HypothesisViolation(f"horizon is not totally geodesic (g(nabla_X V, Y) up to {sff:.3e})")
    gVN = np.einsum("...a,...a->...", V, g[..., :, tc])
    omega = np.einsum("...jc,...c->...j", dV_h, g[..., :, tc]) / gVN[..., None]
    omega_v = np.einsum("...j,...j->...", omega, V[..., hc])
    par = maxabs(dV_h - omega[..., :, None] * V[..., None, :])
    if dropped is None:
        dropped = _pick_dropped(V[..., hc]) if n > 1 else 0
    basis = []
    gram_min = float("inf")
    for j in range(n):
        if j == dropped:
            continue
        w = -omega[..., j, None] * V
        w[..., hc[j]] += 1.0
        for e in basis:
            w = w - np.einsum("...a,...ab,...b->...", w, g, e)[..., None] * e
        nn = np.einsum("...a,...ab,...b->...", w, g, w)
        gram_min = min(gram_min, float(nn.min()))
        if nn.min() <= 1e-12:
            raise GeometryError("metric is not positive definite on ker(omega)")
        basis.append(w / np.sqrt(nn)[..., None])
    E = np.stack(basis, axis=-2) if basis else np.zeros(V.shape[:-1] + (0, V.shape[-1]))
    checks = {
        "second_fundamental_form": sff,
        "omega_V_minus_1": maxabs(omega_v - 1.0),
        "omega_parallel_residual": par,
        "E_min_eigenvalue": gram_min if basis else None,
    }
    return V, omega, E, dropped, g, checks


def build_L(spec, V: np.ndarray, E: np.ndarray, g: np.ndarray, P: np.ndarray, orientation: int = 1):
    """Null field with ``g(L, V) = -1`` and ``L`` orthogonal to E, future pointing."""
    tc = spec.horizon_index
    N0 = np.zeros_like(V)
    N0[..., tc] = 1.0
    N = N0 - np.einsum("...ia,...ab,...b,...ic->...c", E, g, N0, E)
    gNV = np.einsum("...a,...ab,...b->...", N, g, V)
    if np.abs(gNV).min() < 1e-12:
        raise GeometryError("transverse direction is orthogonal to V; cannot solve for L")
    gNN = np.einsum("...a,...ab,...b->...", N, g, N)
    a = -1.0 / gNV
    b = -a * gNN / (2.0 * gNV)
    L = a[..., None] * N + b[..., None] * V
    T = spec.time_orientation.at(P) * orientation
    future = np.einsum("...a,...ab,...b->...", L, g, T)
    if np.any(future >= 0.0):
        raise OrientationError("L is past pointing for the declared time orientation")
    checks = {
        "g_LL": maxabs(np.einsum("...a,...ab,...b->...", L, g, L)),
        "g_LV_plus_1": maxabs(np.einsum("...a,...ab,...b->...", L, g, V) + 1.0),
        "g_LE": maxabs(np.einsum("...a,...ab,...ib->...i", L, g, E)),
        "transverse_min": float(np.abs(L[..., tc]).min()),
    }
    return L, checks


def horizon_frame(spec, Y: np.ndarray, scale: float | None = None, dropped: int | None = None,
                  orientation: int = 1) -> HorizonFrame:
    """All pointwise horizon data at ``Y``; ``scale`` defaults to 1/kappa measured at ``Y``."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    checks = {}
    if scale is None:
        raw, gen = normalize_kappa(spec, Y)
        scale = gen.scale
        checks["kappa_raw"] = float(raw.kappa.mean())
        checks["kappa_normalized_minus_1"] = maxabs(gen.kappa - 1.0)
    V, omega, E, dropped, g, c1 = build_omega_E(spec, Y, scale, dropped)
    P = to_chart(spec, Y)
    L, c2 = build_L(spec, V, E, g, P, orientation)
    checks.update(c1)
    checks.update(c2)
    return HorizonFrame(Y, P, g, V, omega, E, L, scale, dropped, checks)
