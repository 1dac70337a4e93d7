"""Transport ODE, maximum principle and the transverse jet verifier."""
from .transport import OdeSolution, TransportProblem, max_principle_verdict, solve_norm_ode
from .verifier import (JetTable, base_case_check, compute_jets, dt_component_reduce,
                       induction_residuals, jet_audit, transport_residual)

__all__ = ["OdeSolution", "TransportProblem", "max_principle_verdict", "solve_norm_ode", "JetTable",
           "base_case_check", "compute_jets", "dt_component_reduce", "induction_residuals", "jet_audit",
           "transport_residual"]
