"""Causal character of a Killing field near the horizon."""
from __future__ import annotations

import numpy as np

from ..errors import GeometryError
from ..frame import series as S
from ..frame.foliation import flow_foliation
from ..frame.horizon import HorizonLocus, horizon_frame, maxabs
from ..geometry.fields import TensorFieldNum

HORIZON_TOL = 1e-10
SLOPE_TOL = 1e-6
NONTRIVIAL = 1e-6
EXPECTED_SLOPE = 2.0


def _resolve(spec, W) -> tuple[str, TensorFieldNum]:
    if W is None:
        return "declared", spec.killing_field()
    if isinstance(W, str):
        return W, spec.killing_field(W)
    return getattr(W, "name", "") or "supplied", W


def killing_causal_audit(spec, W=None, epsilon: float = 0.5, grid: int | None = None) -> dict:
    """Sign pattern of ``g(W, W)`` across the horizon along the null fibers.

    ``W`` may be ``None`` (the declared Killing field), the name of an
    alternate Killing field, or a vector field.  The slope
    ``d/dt g(W, W)`` at t = 0 comes from the exact fiber series.
    """
    name, field = _resolve(spec, W)
    locus = HorizonLocus.build(spec, grid)
    hf = horizon_frame(spec, locus.points)
    w0 = field.at(hf.P)
    if np.linalg.norm(w0, axis=-1).max() < NONTRIVIAL:
        raise GeometryError(f"Killing field {name!r} vanishes on the horizon")
    x = S.geodesic_series(spec.metric, hf.P, hf.L, 2)
    g = S.metric_series(spec.metric, x, with_partials=False)
    env = dict(zip(spec.coords, S.as_jets(x)))
    w = S.from_values([e.evaluate(env) for e in field.exprs], x, (spec.dim,))
    norm = S.mul("...a,...ab->...b", w, g)
    norm = S.mul("...b,...b->...", norm, w)
    on_horizon = maxabs(norm[0])
    slope = S.derivative_at_zero(norm, 1)

    def sampled(eps):
        fol = flow_foliation(locus, eps, hframe=hf)
        vals = np.einsum("...a,...ab,...b->...", field.at(fol.X), spec.metric.at(fol.X), field.at(fol.X))
        return fol, vals[1:]

    fol_plus, plus = sampled(abs(epsilon))
    report = {
        "example": spec.name,
        "field": name,
        "grid": list(locus.shape),
        "on_horizon": on_horizon,
        "dt_norm_at_0": float(np.mean(slope)),
        "dt_norm_at_0_spread": maxabs(slope - np.mean(slope)),
        "future_side": {"t_max": fol_plus.epsilon, "min": float(plus.min()), "max": float(plus.max())},
    }
    checks = {
        "null_on_horizon": on_horizon <= HORIZON_TOL,
        "spacelike_future_side": bool(plus.min() > 0.0),
        "slope_is_2": maxabs(slope - EXPECTED_SLOPE) <= SLOPE_TOL,
    }
    if spec.extends:
        fol_minus, minus = sampled(-abs(epsilon))
        report["extension_side"] = {"t_min": fol_minus.epsilon, "min": float(minus.min()),
                                    "max": float(minus.max())}
        checks["timelike_extension_side"] = bool(minus.max() < 0.0)
    else:
        report["extension_side"] = None
    report["checks"] = checks
    report["verdict"] = "PASS" if all(checks.values()) else "FAIL"
    return report
