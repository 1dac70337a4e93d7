"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""
import math
import time

import numpy as np
import pytest

from horizonkit.catalog import killing_causal_audit
from horizonkit.errors import DegenerateHorizonError
from horizonkit.frame import HorizonLocus, flow_foliation, frame_audit, normalize_kappa, propagate_frame
from horizonkit.geometry.curvature import numeric_sweep
from horizonkit.jets import TransportProblem, jet_audit, max_principle_verdict, solve_norm_ode
from horizonkit.symbolic import OPEN, PROVED, load_identities, mutations, prove, prove_identity_A1, prove_identity_A2
from cached import frame_report, jet_report, spec


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


def test_criterion_1_vector_identity_proof(report):
    t0 = time.perf_counter()
    r = prove_identity_A1()
    dt = time.perf_counter() - t0
    report(1, r.verdict == PROVED and r.residual == "0" and dt <= 10.0,
           f"verdict {r.verdict}, residual {r.residual}, {dt:.2f} s")


def test_criterion_2_lie_identity_proof_and_mutations(report):
    t0 = time.perf_counter()
    r = prove_identity_A2(sub_proofs=True)
    dt = time.perf_counter() - t0
    ids = load_identities()
    muts = mutations(ids["A1"]) + mutations(ids["A2"])
    rejected = sum(prove(m).verdict == OPEN for m in muts)
    subs = {s.name: s.verdict for s in r.sub_proofs}
    ok = (r.verdict == PROVED and all(v == PROVED for v in subs.values()) and {"A4", "A7", "A8"} <= set(subs)
          and dt <= 60.0 and len(muts) == 20 and rejected == 20)
    report(2, ok, f"verdict {r.verdict}, sub-proofs {subs}, {dt:.2f} s, mutations rejected {rejected}/{len(muts)}")


def test_criterion_3_numeric_residuals(report):
    t0 = time.perf_counter()
    rep = numeric_sweep(seed=0, metrics=5, points=20, fields=3)
    dt = time.perf_counter() - t0
    worst = max(rep["max_rel_residual"].values())
    report(3, worst <= 1e-6 and dt <= 30.0 and len(rep["runs"]) == 30,
           f"max relative residual {worst:.2e}, {dt:.2f} s")


def test_criterion_4_misner_metric_table(report):
    r = frame_report("misner2d")
    res = r["lemma21"]["max_residuals"]
    slab = max(res[k] for k in ("g00", "g01_plus_1", "g0i", "g1i_at_0"))
    deriv = max(res["dt_g11_minus_2"], res["dt_g00inv_plus_2"])
    raw, norm = normalize_kappa(spec("misner2d"), HorizonLocus.build(spec("misner2d"), 16).points)
    kraw = float(np.mean(raw.kappa))
    kerr = float(np.abs(norm.kappa - 1.0).max())
    ok = slab <= 1e-8 and deriv <= 1e-6 and abs(kraw + 0.5) <= 1e-12 and kerr <= 1e-10
    report(4, ok, f"slab residual {slab:.1e}, derivative residual {deriv:.1e}, raw kappa {kraw}, "
                  f"|kappa - 1| {kerr:.1e}")


def test_criterion_5_jet_blocks(report):
    t0 = time.perf_counter()
    worst = {}
    ok = True
    for name in ("misner2d", "misner_x_t2"):
        rows = jet_audit(spec(name), 3)["per_order"]  # fresh run, so the timing is honest
        ok = ok and len(rows) == 5
        for k, row in enumerate(rows):
            ratio = max(row.values()) / (1e-6 * 10 ** k)
            worst[name] = max(worst.get(name, 0.0), ratio)
            ok = ok and ratio <= 1.0
    dt = time.perf_counter() - t0
    report(5, ok and dt <= 120.0, f"k = 0..4, worst block / tolerance {worst}, {dt:.1f} s")


def test_criterion_6_maximum_principle(report):
    decay = 0.0
    for beta in (1.0, 2.0, 5.0):
        p = TransportProblem(np.zeros((1, 4, 4)), beta=beta, length=4 * math.pi)
        sol = solve_norm_ode(p, 1.0, p.length)
        decay = max(decay, float(np.abs(sol.y - np.exp(-2 * beta * sol.s)).max()))
    unit = np.zeros((1, 4, 4))
    unit[0, 2, 2] = 1.0
    defect = max_principle_verdict(TransportProblem(unit, beta=1.0, length=2 * math.pi))["defect"]
    derr = abs(defect - (1 - math.exp(-4 * math.pi)))
    rng = np.random.default_rng(11)
    rejected = 0
    for _ in range(100):
        a = np.zeros((8, 4, 4))
        b = rng.normal(size=(8, 2, 2))
        a[..., 2:, 2:] = b + np.swapaxes(b, -1, -2)
        beta = float(rng.choice([-1, 1]) * rng.uniform(0.1, 5.0))
        rejected += max_principle_verdict(TransportProblem(a, beta=beta))["verdict"] == "FAIL-PERIODICITY"
    report(6, decay <= 1e-8 and derr <= 1e-8 and rejected == 100,
           f"decay error {decay:.1e}, defect error {derr:.1e}, rejected {rejected}/100")


def test_criterion_7_causal_character(report):
    r = killing_causal_audit(spec("misner2d"))
    ok = (r["on_horizon"] <= 1e-10 and r["future_side"]["min"] > 0 and r["extension_side"]["max"] < 0
          and abs(r["dt_norm_at_0"] - 2.0) <= 1e-6)
    report(7, ok, f"on horizon {r['on_horizon']:.1e}, future min {r['future_side']['min']:.3g}, "
                  f"extension max {r['extension_side']['max']:.3g}, slope {r['dt_norm_at_0']:.9f}")


def test_criterion_8_negative_controls(report):
    results = {}
    try:
        frame_audit(spec("degenerate_control"), 16)
        results["degenerate"] = False
    except DegenerateHorizonError:
        results["degenerate"] = True
    results["nonvacuum"] = bool(jet_report("nonvacuum_control", 0)["hypothesis_flags"])
    base = jet_report("misner_x_t2", 1, "perturbed")["base_case"]
    results["perturbed"] = base["verdict"] == "FAIL" and max(base["blocks"].values()) >= 1e-3
    results["wrong_killing"] = killing_causal_audit(spec("misner_x_t2"), "shifted")["verdict"] == "FAIL"
    report(8, all(results.values()), f"{sum(results.values())}/4 controls: {results}")


def test_criterion_9_propagated_generator(report):
    worst = {}
    for name in ("misner2d", "misner_x_t2"):
        fol = flow_foliation(HorizonLocus.build(spec(name)), 0.5)
        worst[name] = propagate_frame(fol).checks["propagated_V_minus_killing"]
    report(9, max(worst.values()) <= 1e-8, f"max |V - W| on the slab {worst}")
