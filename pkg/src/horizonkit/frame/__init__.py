"""Horizon geometry, null foliation and the propagated adapted frame."""
from .adapted import AdaptedJets, adapted_jets
from .audit import check_preparations, frame_audit, metric_table
from .foliation import AdaptedFrame, NullFoliation, flow_foliation, propagate_frame
from .horizon import (GeneratorField, HorizonFrame, HorizonLocus, build_L, build_omega_E, horizon_frame,
                      measure_kappa, normalize_kappa)

__all__ = ["AdaptedJets", "adapted_jets", "check_preparations", "frame_audit", "metric_table", "AdaptedFrame",
           "NullFoliation", "flow_foliation", "propagate_frame", "GeneratorField", "HorizonFrame",
           "HorizonLocus", "build_L", "build_omega_E", "horizon_frame", "measure_kappa", "normalize_kappa"]
