# Module for forced mechanical systems on R x TQ and R x T*Q:
# - MechanicalSystem: mass matrix M(t,q), potential V(t,q), external force F(t,q,v)
# - Lagrangian, energy and Hamiltonian evaluation
# - Legendre transform in both directions
# - Forced Euler-Lagrange and forced Hamiltonian evolution vector fields
#
# Sign convention: d/dt(dL/dv) - dL/dq = -F, with F the Lagrangian force components.

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from mechanics.errors import DimensionMismatchError, NonFiniteStateError, SingularMetricError
from mechanics.numerics import (
    CONDITION_CAP,
    DEFAULT_FD_STEP,
    SYMMETRY_TOL,
    central_derivative,
    central_gradient,
)
from mechanics.states import CotangentState, StateDerivative, TangentState

# Configure logging for this module
logger = logging.getLogger(__name__)

MassFn = Callable[[float, np.ndarray], np.ndarray]
PotentialFn = Callable[[float, np.ndarray], float]
ForceFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]


def zero_potential(t: float, q: np.ndarray) -> float:
    return 0.0


def zero_force(t: float, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.zeros_like(q)


@dataclass(frozen=True)
class MechanicalSystem:
    """
    A mechanical Lagrangian L = 1/2 v^T M(t,q) v - V(t,q) with an external force.

    Optional analytic derivative evaluators replace the central finite differences:
    - mass_dq(t, q): array (n, n, n), entry [k] is dM/dq_k
    - mass_dt(t, q): array (n, n)
    - potential_dq(t, q): array (n,)
    - potential_dt(t, q): float
    """

    n: int
    mass: MassFn
    potential: PotentialFn = zero_potential
    force: ForceFn = zero_force
    coordinate_labels: Sequence[str] = ()
    time_dependent: bool = False
    mass_dq: Callable | None = None
    mass_dt: Callable | None = None
    potential_dq: Callable | None = None
    potential_dt: Callable | None = None
    fd_step: float = DEFAULT_FD_STEP
    name: str = "system"

    def __post_init__(self):
        if int(self.n) < 1:
            raise DimensionMismatchError(f"configuration dimension must be >= 1, got {self.n}")
        labels = tuple(self.coordinate_labels) or tuple(f"q{i}" for i in range(self.n))
        if len(labels) != self.n:
            raise DimensionMismatchError(f"expected {self.n} coordinate labels, got {len(labels)}")
        object.__setattr__(self, "coordinate_labels", labels)


# =============================================================================
# EVALUATION HELPERS
# =============================================================================


def _check_dims(sys: MechanicalSystem, q: np.ndarray, w: np.ndarray | None = None):
    if q.size != sys.n or (w is not None and w.size != sys.n):
        raise DimensionMismatchError(f"{sys.name}: expected dimension {sys.n}, got q={q.size}")


def _finite(name: str, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteStateError(f"{name} evaluated to non-finite values: {arr}")
    return arr


def mass_matrix(sys: MechanicalSystem, t: float, q: np.ndarray) -> np.ndarray:
    """Evaluate M(t,q) and check shape, finiteness and symmetry."""
    M = _finite("mass", sys.mass(t, q)).reshape(sys.n, sys.n)
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) > SYMMETRY_TOL * scale:
        raise SingularMetricError(f"{sys.name}: mass matrix is not symmetric at t={t}, q={q}")
    return M


def _factor(sys: MechanicalSystem, t: float, q: np.ndarray):
    """Cholesky factor of M(t,q), raising SingularMetricError past the condition cap."""
    M = mass_matrix(sys, t, q)
    eig = np.linalg.eigvalsh(M)
    if eig[0] <= 0 or eig[-1] / eig[0] > CONDITION_CAP:
        raise SingularMetricError(f"{sys.name}: mass matrix singular or ill-conditioned at q={q} (eig={eig})")
    try:
        return cho_factor(M)
    except LinAlgError as e:
        raise SingularMetricError(f"{sys.name}: Cholesky failed at q={q}: {e}") from e


def solve_mass(sys: MechanicalSystem, t: float, q: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve M(t,q) x = rhs with a symmetric positive-definite factorization."""
    return cho_solve(_factor(sys, t, q), rhs)


def mass_derivatives(sys: MechanicalSystem, t: float, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (dM/dq with derivative index first, dM/dt)."""
    n = sys.n
    if sys.mass_dq is not None:
        dM = _finite("mass_dq", sys.mass_dq(t, q)).reshape(n, n, n)
    else:
        dM = central_gradient(lambda qq: sys.mass(t, qq), q, sys.fd_step).reshape(n, n, n)
    if not sys.time_dependent:
        dMt = np.zeros((n, n))
    elif sys.mass_dt is not None:
        dMt = _finite("mass_dt", sys.mass_dt(t, q)).reshape(n, n)
    else:
        dMt = central_derivative(lambda tt: sys.mass(tt, q), t, sys.fd_step).reshape(n, n)
    return dM, dMt


def potential_gradient(sys: MechanicalSystem, t: float, q: np.ndarray) -> np.ndarray:
    if sys.potential_dq is not None:
        return _finite("potential_dq", sys.potential_dq(t, q)).reshape(sys.n)
    return central_gradient(lambda qq: sys.potential(t, qq), q, sys.fd_step).reshape(sys.n)


def potential_time_derivative(sys: MechanicalSystem, t: float, q: np.ndarray) -> float:
    if not sys.time_dependent:
        return 0.0
    if sys.potential_dt is not None:
        return float(_finite("potential_dt", sys.potential_dt(t, q)))
    return float(central_derivative(lambda tt: sys.potential(tt, q), t, sys.fd_step))


def force_components(sys: MechanicalSystem, t: float, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Lagrangian force components F_i(t,q,v), checked to be a finite length-n covector."""
    F = _finite("force", sys.force(t, q, v)).reshape(-1)
    if F.size != sys.n:
        raise DimensionMismatchError(f"{sys.name}: force returned {F.size} components, expected {sys.n}")
    return F


# =============================================================================
# SCALAR FUNCTIONS
# =============================================================================


def eval_lagrangian(sys: MechanicalSystem, s: TangentState) -> float:
    """L = 1/2 v^T M(t,q) v - V(t,q)."""
    _check_dims(sys, s.q, s.v)
    M = mass_matrix(sys, s.t, s.q)
    return float(_finite("lagrangian", 0.5 * s.v @ M @ s.v - sys.potential(s.t, s.q)))


def energy(sys: MechanicalSystem, s: TangentState) -> float:
    """E_L = 1/2 v^T M(t,q) v + V(t,q)."""
    _check_dims(sys, s.q, s.v)
    M = mass_matrix(sys, s.t, s.q)
    return float(_finite("energy", 0.5 * s.v @ M @ s.v + sys.potential(s.t, s.q)))


def kinetic_energy(sys: MechanicalSystem, s: TangentState) -> float:
    _check_dims(sys, s.q, s.v)
    return float(0.5 * s.v @ mass_matrix(sys, s.t, s.q) @ s.v)


def eval_hamiltonian(sys: MechanicalSystem, s: CotangentState) -> float:
    """H = 1/2 p^T M^-1 p + V, the energy expressed on the cotangent side."""
    _check_dims(sys, s.q, s.p)
    v = solve_mass(sys, s.t, s.q, s.p)
    return float(_finite("hamiltonian", 0.5 * s.p @ v + sys.potential(s.t, s.q)))


def energy_rate(sys: MechanicalSystem, s: TangentState) -> float:
    """dE_L/dt along the forced Euler-Lagrange field: -dL/dt - <F, v>."""
    _check_dims(sys, s.q, s.v)
    _, dMt = mass_derivatives(sys, s.t, s.q)
    dLdt = 0.5 * s.v @ dMt @ s.v - potential_time_derivative(sys, s.t, s.q)
    return float(-dLdt - force_components(sys, s.t, s.q, s.v) @ s.v)


# =============================================================================
# LEGENDRE TRANSFORM
# =============================================================================


def legendre_forward(sys: MechanicalSystem, s: TangentState) -> CotangentState:
    """(t, q, v) -> (t, q, M(t,q) v)."""
    _check_dims(sys, s.q, s.v)
    return CotangentState(s.t, s.q, mass_matrix(sys, s.t, s.q) @ s.v)


def legendre_inverse(sys: MechanicalSystem, s: CotangentState) -> TangentState:
    """(t, q, p) -> (t, q, M(t,q)^-1 p); raises SingularMetricError past the condition cap."""
    _check_dims(sys, s.q, s.p)
    return TangentState(s.t, s.q, solve_mass(sys, s.t, s.q, s.p))


# =============================================================================
# EVOLUTION VECTOR FIELDS
# =============================================================================


def acceleration(sys: MechanicalSystem, t: float, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve M dv = dL/dq - (dM/dt) v - Gamma(q, v) - F for dv (array form, used by the integrator)."""
    dM, dMt = mass_derivatives(sys, t, q)
    dLdq = 0.5 * np.einsum("kij,i,j->k", dM, v, v) - potential_gradient(sys, t, q)
    convective = np.einsum("kij,k,j->i", dM, v, v)
    rhs = dLdq - dMt @ v - convective - force_components(sys, t, q, v)
    return _finite("acceleration", solve_mass(sys, t, q, rhs))


def forced_el_field(sys: MechanicalSystem, s: TangentState) -> StateDerivative:
    """Forced Euler-Lagrange evolution field at s: (dq, dv, dt) = (v, a(t,q,v), 1)."""
    _check_dims(sys, s.q, s.v)
    return StateDerivative(s.v, acceleration(sys, s.t, s.q, s.v), 1.0)


def momentum_rate(sys: MechanicalSystem, t: float, q: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (dq, dp) = (M^-1 p, -dH/dq - F(t, q, M^-1 p))."""
    v = solve_mass(sys, t, q, p)
    dM, _ = mass_derivatives(sys, t, q)
    dHdq = -0.5 * np.einsum("kij,i,j->k", dM, v, v) + potential_gradient(sys, t, q)
    return v, -dHdq - force_components(sys, t, q, v)


def forced_hamiltonian_field(sys: MechanicalSystem, s: CotangentState) -> StateDerivative:
    """Forced Hamiltonian evolution field at s, with F pulled back through the inverse Legendre map."""
    _check_dims(sys, s.q, s.p)
    dq, dp = momentum_rate(sys, s.t, s.q, s.p)
    return StateDerivative(dq, dp, 1.0)
