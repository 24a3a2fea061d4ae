"""Momentum maps, impact classification, Routh reduction and reconstruction for cyclic symmetries."""

from symmetry.momentum import (
    GENERALIZED,
    HYBRID,
    NEITHER,
    ClassificationReport,
    CyclicStructure,
    HybridConstantReport,
    MomentumValue,
    annotate_momentum,
    check_hybrid_constant,
    classify_momentum_map,
    momentum_map,
    validate_cyclic_structure,
)
from symmetry.noether import SymmetryReport, check_symmetry, check_symmetry_hamiltonian
from symmetry.routh import ReducedSystem, reconstruct, reduced_field, routh_reduce, run_reduced_hybrid_flow

__all__ = [
    "GENERALIZED",
    "HYBRID",
    "NEITHER",
    "ClassificationReport",
    "CyclicStructure",
    "HybridConstantReport",
    "MomentumValue",
    "ReducedSystem",
    "SymmetryReport",
    "annotate_momentum",
    "check_hybrid_constant",
    "check_symmetry",
    "check_symmetry_hamiltonian",
    "classify_momentum_map",
    "momentum_map",
    "reconstruct",
    "reduced_field",
    "routh_reduce",
    "run_reduced_hybrid_flow",
    "validate_cyclic_structure",
]
