"""Exact model spacetimes with null horizons, Killing fields and negative controls."""
from .audit import killing_causal_audit
from .spec import SpacetimeSpec, available, check_invariants, from_dict, load, validate

__all__ = ["SpacetimeSpec", "available", "check_invariants", "from_dict", "killing_causal_audit", "load",
           "validate"]
