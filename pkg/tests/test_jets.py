"""Transport ODE, maximum principle and the transverse jet verifier."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizonkit.errors import BlockError, DomainError, StructuralError
from horizonkit.jets import (TransportProblem, base_case_check, compute_jets, dt_component_reduce,
                             induction_residuals, max_principle_verdict, solve_norm_ode, transport_residual)
from horizonkit.jets.verifier import jet_tolerance
from cached import jet_report, spec


def ee_tensor(block):
    block = np.asarray(block, dtype=float)
    n = block.shape[-1] + 2
    a = np.zeros(block.shape[:-2] + (n, n))
    a[..., 2:, 2:] = block
    return a


# -- transport ODE -----------------------------------------------------------

@pytest.mark.parametrize("beta", [1.0, 2.0, 5.0])
def test_norm_decays_exponentially(beta):
    p = TransportProblem(np.zeros((1, 4, 4)), beta=beta, length=4 * math.pi)
    sol = solve_norm_ode(p, 1.0, p.length)
    assert np.abs(sol.y - np.exp(-2 * beta * sol.s)).max() <= 1e-8


def test_unit_interval_value():
    sol = solve_norm_ode(TransportProblem(np.zeros((4, 4)), beta=2.0), 1.0, 1.0)
    assert sol.at_end() == pytest.approx(math.exp(-4.0), abs=1e-12)


def test_zero_initial_value_stays_zero():
    sol = solve_norm_ode(TransportProblem(np.zeros((4, 4)), beta=3.0), 0.0, 5.0)
    assert np.all(sol.y == 0.0)


def test_variable_rate():
    p = TransportProblem(np.zeros((4, 4)), beta=lambda s: 1.0 + np.sin(s))
    sol = solve_norm_ode(p, 1.0, 2 * math.pi)
    exact = np.exp(-2 * (sol.s + 1 - np.cos(sol.s)))
    assert np.abs(sol.y - exact).max() <= 1e-8


def test_step_count_scales_with_rate():
    small = solve_norm_ode(TransportProblem(np.zeros((4, 4)), beta=0.1), 1.0, 1.0)
    big = solve_norm_ode(TransportProblem(np.zeros((4, 4)), beta=50.0), 1.0, 2 * math.pi)
    assert small.checks["steps"] == 1024
    assert big.checks["steps"] == math.ceil(2 * 50 * 2 * math.pi / 0.005)


def test_domain_errors():
    p = TransportProblem(np.zeros((4, 4)))
    with pytest.raises(DomainError):
        solve_norm_ode(p, -1.0, 1.0)
    with pytest.raises(DomainError):
        solve_norm_ode(p, 1.0, -1.0)


def test_components_outside_E_rejected():
    a = np.zeros((4, 4))
    a[0, 2] = a[2, 0] = 1.0
    with pytest.raises(BlockError):
        TransportProblem(a)


# -- maximum principle -------------------------------------------------------

def test_periodicity_defect():
    r = max_principle_verdict(TransportProblem(ee_tensor([[[1.0, 0.0], [0.0, 0.0]]]), beta=1.0))
    assert r["verdict"] == "FAIL-PERIODICITY"
    assert r["defect"] == pytest.approx(1.0 - math.exp(-4 * math.pi), abs=1e-8)


def test_zero_tensor_passes():
    assert max_principle_verdict(TransportProblem(np.zeros((8, 4, 4))))["verdict"] == "PASS"


def test_open_generator_cannot_use_periodicity():
    r = max_principle_verdict(TransportProblem(ee_tensor([[[1.0, 0.0], [0.0, 0.0]]]), length=None))
    assert r["verdict"] == "FAIL" and "defect" not in r


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3).filter(lambda v: max(map(abs, v)) > 1e-3),
       st.floats(0.25, 4.0), st.sampled_from([-1.0, 1.0]))
def test_nonzero_candidates_rejected(c, beta, sign):
    block = np.array([[c[0], c[1]], [c[1], c[2]]])
    r = max_principle_verdict(TransportProblem(ee_tensor(block[None]), beta=sign * beta))
    assert r["verdict"] == "FAIL-PERIODICITY"
    assert r["defect"] > 0


def test_defect_independent_of_grid():
    blk = np.array([[0.3, 0.1], [0.1, -0.2]])
    coarse = max_principle_verdict(TransportProblem(ee_tensor(np.broadcast_to(blk, (16, 2, 2))), beta=0.5))
    fine = max_principle_verdict(TransportProblem(ee_tensor(np.broadcast_to(blk, (32, 2, 2))), beta=0.5))
    assert coarse["defect"] == pytest.approx(fine["defect"], rel=1e-12)


# -- jet verifier ------------------------------------------------------------

def test_tolerance_relaxes_per_order():
    assert jet_tolerance(0) == 1e-6
    assert jet_tolerance(3) == pytest.approx(1e-3)


@pytest.mark.parametrize("name", ["misner2d", "misner_x_t2"])
def test_exact_killing_jets_vanish(name):
    r = jet_report(name, 3)
    assert r["verdicts"] == {"base_case": "PASS", "induction": "PASS"}
    for k, row in enumerate(r["per_order"]):
        assert max(row.values()) <= jet_tolerance(k), k
    assert max(r["ricci"]) <= 1e-8
    assert not r["hypothesis_flags"]


def test_misner_dt_component_is_zero():
    r = jet_report("misner2d", 3)
    d = r["dt_component"][0]
    assert d["lie_form"] <= 1e-10 and d["difference"] <= 1e-10


def test_perturbed_generator_violates_V_E_block():
    # adding 0.01 sin(psi) d_x tilts V into E; the (V, e_x) entry peaks at 0.02
    r = jet_report("misner_x_t2", 1, "perturbed")
    base = r["base_case"]
    assert base["verdict"] == "FAIL"
    assert base["violated"] == ["V_E"]
    assert base["blocks"]["V_E"] == pytest.approx(0.02, rel=1e-6)


def test_t_squared_perturbation_shows_at_first_order():
    # 0.01 t^2 d_x: invisible at t = 0, L_V g(dt, e_x) = 0.02 t to first order
    r = jet_report("misner_x_t2", 2, "dt_perturbed")
    assert r["base_case"]["verdict"] == "PASS"
    assert r["per_order"][0]["dt"] <= 1e-10
    assert r["per_order"][1]["dt"] == pytest.approx(0.02, rel=1e-6)
    assert r["per_order"][2]["V"] == pytest.approx(0.04, rel=1e-6)
    assert r["dt_component"][0]["lie_form"] == pytest.approx(0.02, rel=1e-6)
    assert r["verdicts"]["induction"] == "FAIL"


def test_nonvacuum_flagged():
    r = jet_report("nonvacuum_control", 0)
    assert r["base_case"]["verdict"] == "SKIPPED"
    assert r["hypothesis_flags"][0].startswith("Ric|_H != 0")
    assert r["verdicts"]["hypothesis"] == "FLAGGED"
    assert r["verdicts"]["induction"] == "FAIL"


def test_induction_order_zero_agrees_with_base_case():
    table = compute_jets(spec("misner_x_t2"), 1, grid=4, candidate="perturbed")
    base = base_case_check(table)
    ind = induction_residuals(table, 0)
    assert base["verdict"] == "FAIL" and ind["verdict"] == "FAIL"
    assert ind["orders"][0]["blocks"]["V"] == pytest.approx(base["blocks"]["V_E"], rel=1e-12)


def test_covariant_and_lie_forms_agree():
    table = compute_jets(spec("misner_x_t2"), 3, grid=4, candidate="dt_perturbed")
    for k in range(3):
        assert dt_component_reduce(table, k)["difference"] <= 1e-8


def test_order_limits():
    table = compute_jets(spec("misner2d"), 1, grid=8)
    with pytest.raises(StructuralError):
        induction_residuals(table, 1)
    with pytest.raises(StructuralError):
        dt_component_reduce(table, 5)


def test_transport_residual_zero_for_exact_field():
    table = compute_jets(spec("misner_x_t2"), 1, grid=4)
    assert transport_residual(table, 0) <= 1e-10
    assert transport_residual(table, 1) <= 1e-10


def test_transport_residual_detects_constant_block():
    # constant E block c: nabla_V c = 0 on the flat product, so residual is k * c
    table = compute_jets(spec("misner_x_t2"), 1, grid=4)
    a = np.zeros_like(table.lie[0])
    a[..., 2, 2] = 0.5
    assert transport_residual(table, 2, a) == pytest.approx(1.0, abs=1e-10)
