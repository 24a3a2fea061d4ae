# Module for the discrete part of a simple hybrid system:
# - Guard: switching surface h(t,q) = 0, crossed from h > 0 with approach < 0
# - ImpactLaw: Newtonian restitution or a custom configuration-preserving map
# - HybridSystem: a MechanicalSystem plus an ordered list of (Guard, ImpactLaw) transitions
# - Newtonian impact in velocity and momentum form, and dispatch by guard label

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from mechanics.errors import DegenerateGuardError, HybridSimError, NonFiniteStateError, UnknownGuardError
from mechanics.numerics import DEFAULT_FD_STEP, central_derivative, central_gradient
from mechanics.states import CotangentState, TangentState
from mechanics.system import MechanicalSystem, legendre_forward, legendre_inverse, solve_mass

# Configure logging for this module
logger = logging.getLogger(__name__)

# Below this norm a guard normal counts as zero
DEGENERATE_NORMAL = 1e-12
# Default admissibility band for guard constraints (e.g. rolling without sliding)
DEFAULT_CONSTRAINT_BAND = 1e-6


@dataclass(frozen=True)
class Guard:
    """
    Switching surface h(t, q) = 0. The admissible domain is h > 0; an impact is admissible
    when approach(t, q, v) < 0.

    Optional fields:
    - h_dq, h_dt: analytic partial derivatives of h (finite differences otherwise)
    - constraint: (t, q, v) -> vector, affine in v, vanishing on the switching set
    - strict: when True the guard fires only if |constraint| <= band
    """

    label: str
    h: Callable[[float, np.ndarray], float]
    approach: Callable[[float, np.ndarray, np.ndarray], float] | None = None
    h_dq: Callable[[float, np.ndarray], np.ndarray] | None = None
    h_dt: Callable[[float, np.ndarray], float] | None = None
    constraint: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    strict: bool = False
    band: float = DEFAULT_CONSTRAINT_BAND
    fd_step: float = DEFAULT_FD_STEP

    def normal(self, t: float, q: np.ndarray) -> np.ndarray:
        """Configuration gradient dh/dq."""
        if self.h_dq is not None:
            return np.asarray(self.h_dq(t, q), dtype=float).reshape(-1)
        return central_gradient(lambda qq: self.h(t, qq), q, self.fd_step).reshape(-1)

    def time_rate(self, t: float, q: np.ndarray) -> float:
        """Partial derivative dh/dt."""
        if self.h_dt is not None:
            return float(self.h_dt(t, q))
        return float(central_derivative(lambda tt: self.h(tt, q), t, self.fd_step))

    def value(self, t: float, q: np.ndarray) -> float:
        return float(self.h(t, q))

    def approach_value(self, t: float, q: np.ndarray, v: np.ndarray) -> float:
        """Approach evaluator, defaulting to the normal velocity dh/dt + dh/dq . v."""
        if self.approach is not None:
            return float(self.approach(t, q, v))
        return self.time_rate(t, q) + float(self.normal(t, q) @ v)

    def constraint_residual(self, t: float, q: np.ndarray, v: np.ndarray) -> float:
        if self.constraint is None:
            return 0.0
        return float(np.max(np.abs(np.atleast_1d(self.constraint(t, q, v)))))

    def admits(self, t: float, q: np.ndarray, v: np.ndarray) -> bool:
        """Whether a crossing at this state is an admissible impact."""
        if self.approach_value(t, q, v) >= 0.0:
            return False
        if self.strict and self.constraint_residual(t, q, v) > self.band:
            return False
        return True


@dataclass(frozen=True)
class ImpactLaw:
    """Either Newtonian restitution (kind="newtonian", e) or a custom map (t, q, v) -> (q', v')."""

    kind: str
    e: float = 1.0
    map: Callable[[float, np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]] | None = None

    def __post_init__(self):
        if self.kind == "newtonian":
            if not 0.0 <= self.e <= 1.0:
                raise ValueError(f"restitution coefficient must lie in [0, 1], got {self.e}")
        elif self.kind == "custom":
            if self.map is None:
                raise ValueError("custom impact law needs a map")
        else:
            raise ValueError(f"unknown impact law kind: {self.kind}")

    @classmethod
    def newtonian(cls, e: float) -> ImpactLaw:
        return cls(kind="newtonian", e=float(e))

    @classmethod
    def custom(cls, impact_map) -> ImpactLaw:
        return cls(kind="custom", map=impact_map)


@dataclass(frozen=True)
class HybridSystem:
    """A mechanical system plus ordered (Guard, ImpactLaw) transitions."""

    sys: MechanicalSystem
    transitions: tuple[tuple[Guard, ImpactLaw], ...] = ()
    continuous_only: bool = False

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(tuple(tr) for tr in self.transitions))
        if not self.transitions and not self.continuous_only:
            raise ValueError("hybrid system needs at least one transition or continuous_only=True")
        labels = [g.label for g, _ in self.transitions]
        if len(labels) != len(set(labels)):
            raise ValueError(f"guard labels must be unique, got {labels}")

    @property
    def guards(self) -> list[Guard]:
        return [g for g, _ in self.transitions]

    def transition(self, label: str) -> tuple[Guard, ImpactLaw]:
        for g, law in self.transitions:
            if g.label == label:
                return g, law
        raise UnknownGuardError(f"no guard labelled '{label}' (known: {[g.label for g in self.guards]})")


# =============================================================================
# NEWTONIAN IMPACT
# =============================================================================


def _guard_normal(g: Guard, t: float, q: np.ndarray) -> np.ndarray:
    dh = g.normal(t, q)
    if not np.all(np.isfinite(dh)):
        raise NonFiniteStateError(f"guard '{g.label}' normal is not finite at q={q}")
    if np.linalg.norm(dh) < DEGENERATE_NORMAL:
        raise DegenerateGuardError(f"guard '{g.label}' has a vanishing normal at q={q}")
    return dh


def newtonian_impact(sys: MechanicalSystem, g: Guard, e: float, s: TangentState) -> TangentState:
    """
    Newtonian impact: v+ = v - (1 + e) (dh . v) / (dh M^-1 dh^T) M^-1 dh^T.

    Only the M^-1 dh^T component of the velocity changes; q and t are unchanged.

    Raises:
        DegenerateGuardError: if the guard normal vanishes at s.q
    """
    dh = _guard_normal(g, s.t, s.q)
    minv_dh = solve_mass(sys, s.t, s.q, dh)
    denom = float(dh @ minv_dh)
    v_post = s.v - (1.0 + e) * float(dh @ s.v) / denom * minv_dh
    return TangentState(s.t, s.q, v_post)


def newtonian_impact_momentum(sys: MechanicalSystem, g: Guard, e: float, s: CotangentState) -> CotangentState:
    """Momentum form: p+ = p - (1 + e) <<p, dh>> / ||dh||^2 dh, with the cometric <<a, b>> = a^T M^-1 b."""
    dh = _guard_normal(g, s.t, s.q)
    minv_dh = solve_mass(sys, s.t, s.q, dh)
    p_post = s.p - (1.0 + e) * float(s.p @ minv_dh) / float(dh @ minv_dh) * dh
    return CotangentState(s.t, s.q, p_post)


# =============================================================================
# DISPATCH
# =============================================================================


def _check_on_guard(g: Guard, t: float, q: np.ndarray, tol: float | None):
    if tol is not None and abs(g.value(t, q)) > tol:
        raise HybridSimError(f"state is not on guard '{g.label}': |h| = {abs(g.value(t, q)):.3e} > {tol:.3e}")


def _apply_custom(law: ImpactLaw, label: str, t: float, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    q_post, v_post = law.map(t, q, v)
    q_post = np.asarray(q_post, dtype=float)
    v_post = np.asarray(v_post, dtype=float)
    if not (np.all(np.isfinite(v_post)) and np.all(np.isfinite(q_post))):
        raise NonFiniteStateError(f"custom impact '{label}' produced a non-finite state")
    if np.max(np.abs(q_post - q)) > 1e-12 * max(1.0, float(np.max(np.abs(q)))):
        raise HybridSimError(f"custom impact '{label}' moved the configuration")
    return v_post


def apply_impact(hs: HybridSystem, guard_label: str, s: TangentState, tol: float | None = None) -> TangentState:
    """Apply the impact law registered for ``guard_label``; configuration is preserved."""
    g, law = hs.transition(guard_label)
    _check_on_guard(g, s.t, s.q, tol)
    if law.kind == "newtonian":
        return newtonian_impact(hs.sys, g, law.e, s)
    return TangentState(s.t, s.q, _apply_custom(law, guard_label, s.t, s.q, s.v))


def apply_impact_momentum(
    hs: HybridSystem, guard_label: str, s: CotangentState, tol: float | None = None
) -> CotangentState:
    """Cotangent-side impact: Newtonian momentum formula, custom maps transported by the Legendre map."""
    g, law = hs.transition(guard_label)
    _check_on_guard(g, s.t, s.q, tol)
    if law.kind == "newtonian":
        return newtonian_impact_momentum(hs.sys, g, law.e, s)
    pre = legendre_inverse(hs.sys, s)
    post = TangentState(s.t, s.q, _apply_custom(law, guard_label, pre.t, pre.q, pre.v))
    return legendre_forward(hs.sys, post)
