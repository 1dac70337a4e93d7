"""Frame table, preparation identities and the frame-audit report."""
from __future__ import annotations

import numpy as np

from ..errors import HypothesisViolation
from .adapted import FD1, H, AdaptedJets, adapted_jets
from .foliation import AdaptedFrame, flow_foliation, propagate_frame
from .horizon import HorizonFrame, HorizonLocus, horizon_frame, maxabs

TABLE_TOL = 1e-8
DERIV_TOL = 1e-6
PREP_TOL = 1e-6
VACUUM_TOL = 1e-8
KILLING_TOL = 1e-8


def ricci_on_generator(spec, hf: HorizonFrame) -> float:
    """max |Ric(X, V)| over chart basis vectors X at the horizon points."""
    ric = spec.ricci.at(hf.P)
    return maxabs(np.einsum("...ab,...b->...a", ric, hf.V))


def _derivative_of_L(spec, hf: HorizonFrame, direction: np.ndarray, h: float = H) -> np.ndarray:
    """Chart covariant derivative of L along a horizon-tangent direction."""
    d_h = direction[..., spec.horizon_coords]
    acc = np.zeros_like(hf.L)
    for s, w in FD1:
        off = horizon_frame(spec, hf.Y + s * h * d_h, scale=hf.scale, dropped=hf.dropped)
        acc += w * off.L
    gam = spec.metric.christoffel(hf.P)
    return acc / h + np.einsum("...cab,...a,...b->...c", gam, direction, hf.L)


def check_preparations(spec, hf: HorizonFrame, jets: AdaptedJets) -> dict:
    """Residuals of the preparation identities at t = 0.

    ``nabla_t V + dt`` is measured twice: in adapted coordinates from the
    series data, and in the chart as ``nabla_V L + L``.  For X in E,
    ``nabla_X dt`` must have no component along dt or V.
    """
    ric = ricci_on_generator(spec, hf)
    if ric > VACUUM_TOL:
        raise HypothesisViolation(f"Ric(., V) does not vanish on the horizon (max {ric:.3e})")
    adapted = np.einsum("...ca,...a->...c", jets.gamma_t[0], jets.V)
    adapted[..., 0] += 1.0
    chart = _derivative_of_L(spec, hf, hf.V) + hf.L
    frame = hf.chart_frame
    in_E = 0.0
    for i in range(hf.E.shape[-2]):
        d = _derivative_of_L(spec, hf, hf.E[..., i, :])
        coeff = np.linalg.solve(frame, d[..., None])[..., 0]
        in_E = max(in_E, maxabs(coeff[..., :2]))
    out = {
        "ricci_on_V": ric,
        "nabla_t_V_plus_dt": maxabs(adapted),
        "nabla_V_L_plus_L": maxabs(chart),
        "nabla_E_dt_outside_E": in_E,
    }
    out["pass"] = all(v <= PREP_TOL for k, v in out.items() if k != "ricci_on_V")
    return out


def metric_table(frame: AdaptedFrame, jets: AdaptedJets) -> dict:
    """The frame table: slab values from the propagated frame, t-derivatives from the series."""
    table = frame.table()
    lv = jets.table_values()
    dt_g11 = lv["dt_g11"]
    dt_g00inv = lv["dt_g00inv"]
    residuals = dict(table)
    residuals["dt_g11_minus_2"] = maxabs(dt_g11 - 2.0)
    residuals["dt_g00inv_plus_2"] = maxabs(dt_g00inv + 2.0)
    slab_ok = all(v <= TABLE_TOL for v in table.values())
    deriv_ok = residuals["dt_g11_minus_2"] <= DERIV_TOL and residuals["dt_g00inv_plus_2"] <= DERIV_TOL
    return {
        "g00": table["g00"],
        "g01": float(np.mean(frame.gram[..., 0, 1])),
        "g0i": table["g0i"],
        "g1i_at_0": table["g1i_at_0"],
        "dt_g11": float(np.mean(dt_g11)),
        "dt_g00inv": float(np.mean(dt_g00inv)),
        "max_residuals": residuals,
        "pass": bool(slab_ok and deriv_ok),
    }


def frame_audit(spec, grid: int | None = None, epsilon: float = 0.5, orientation: int = 1) -> dict:
    """Run the whole horizon-frame construction and collect every check."""
    locus = HorizonLocus.build(spec, grid)
    hf = horizon_frame(spec, locus.points, orientation=orientation)
    fol = flow_foliation(locus, epsilon, hframe=hf)
    frame = propagate_frame(fol)
    jets = adapted_jets(spec, locus.points, 1, hframe=hf)
    report = {
        "example": spec.name,
        "grid": list(locus.shape),
        "epsilon": fol.epsilon,
        "kappa_raw": hf.checks["kappa_raw"],
        "kappa": 1.0 + hf.checks["kappa_normalized_minus_1"],
        "horizon": {k: v for k, v in hf.checks.items() if k not in ("kappa_raw",)},
        "foliation": fol.checks,
        "propagation": frame.checks,
        "lemma21": metric_table(frame, jets),
    }
    verdicts = {"lemma21": "PASS" if report["lemma21"]["pass"] else "FAIL",
                "lie_propagation": "PASS" if frame.checks["lie_bracket"] <= 1e-6 else "FAIL"}
    try:
        report["preparations"] = check_preparations(spec, hf, jets)
        verdicts["preparations"] = "PASS" if report["preparations"]["pass"] else "FAIL"
    except HypothesisViolation as exc:
        report["preparations"] = {"hypothesis_violation": str(exc)}
        verdicts["preparations"] = "FLAGGED"
    if "propagated_V_minus_killing" in frame.checks:
        ok = frame.checks["propagated_V_minus_killing"] <= KILLING_TOL
        verdicts["V_equals_W"] = "PASS" if ok else "FAIL"
    report["verdicts"] = verdicts
    return report
