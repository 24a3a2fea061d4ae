"""Forced mechanical systems: states, Legendre transform and evolution vector fields."""

from mechanics.numerics import NumericsConfig
from mechanics.states import CotangentState, StateDerivative, TangentState
from mechanics.system import (
    MechanicalSystem,
    energy,
    energy_rate,
    eval_hamiltonian,
    eval_lagrangian,
    forced_el_field,
    forced_hamiltonian_field,
    kinetic_energy,
    legendre_forward,
    legendre_inverse,
)

__all__ = [
    "CotangentState",
    "MechanicalSystem",
    "NumericsConfig",
    "StateDerivative",
    "TangentState",
    "energy",
    "energy_rate",
    "eval_hamiltonian",
    "eval_lagrangian",
    "forced_el_field",
    "forced_hamiltonian_field",
    "kinetic_energy",
    "legendre_forward",
    "legendre_inverse",
]
