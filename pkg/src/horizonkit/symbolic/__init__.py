"""Exact abstract-index tensor algebra and identity proofs."""
from .calculus import apply_contracted_bianchi, commute_nabla, expand_lie_metric, nabla
from .canon import canonicalize, equivalent
from .core import Atom, Index, Monomial, TensorExpr
from .grammar import parse_identity, parse_identity_file, parse_tensor
from .proofs import (OPEN, PROVED, ProofReport, load_identities, mutations, prove,
                     prove_identity_A1, prove_identity_A2)

__all__ = [
    "Atom", "Index", "Monomial", "TensorExpr", "apply_contracted_bianchi", "canonicalize",
    "commute_nabla", "equivalent", "expand_lie_metric", "load_identities", "mutations", "nabla",
    "parse_identity", "parse_identity_file", "parse_tensor", "prove", "prove_identity_A1",
    "prove_identity_A2", "OPEN", "PROVED", "ProofReport",
]
