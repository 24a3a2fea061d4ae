# Module for the circular billiard with dissipation and a moving wall x^2 + y^2 = f(t):
# - BilliardParams, default f(t) = 2 - exp(t / 10)
# - Time-dependent Cartesian system q = (x, y) and polar system q = (r, theta)
# - Moving-wall elastic impact, identity momentum rule, signed radial reset for the reduced system

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from hybrid.transitions import Guard, HybridSystem, ImpactLaw
from mechanics.errors import ScenarioValidationError
from mechanics.states import TangentState
from mechanics.system import MechanicalSystem
from models.common import (
    ModelBundle,
    cartesian_to_polar,
    check_radius,
    polar_to_cartesian,
    require_positive,
)
from symmetry.momentum import CyclicStructure

# Configure logging for this module
logger = logging.getLogger(__name__)

WALL = "wall"

WALL_PROBE_POINTS = 200

# Initial data of the reference runs (polar)
DEFAULT_R0 = 0.5590
DEFAULT_RDOT0 = 2.8621
DEFAULT_THETA0 = 1.1071
DEFAULT_THETADOT0 = -3.0400


@dataclass(frozen=True)
class BilliardParams:
    """
    Particle of mass m with friction coefficient c inside x^2 + y^2 = f(t).

    Without explicit evaluators the wall is f(t) = wall_offset - exp(t / wall_timescale).
    """

    m: float = 1.0
    c: float = 0.005
    wall_offset: float = 2.0
    wall_timescale: float = 10.0
    f: Callable[[float], float] | None = None
    fdot: Callable[[float], float] | None = None

    def __post_init__(self):
        for name in ("m", "c", "wall_timescale"):
            require_positive(name, getattr(self, name))
        if (self.f is None) != (self.fdot is None):
            raise ScenarioValidationError("model.f", "f and fdot must be given together")

    def wall(self, t: float) -> float:
        if self.f is not None:
            return float(self.f(t))
        return self.wall_offset - np.exp(t / self.wall_timescale)

    def wall_dot(self, t: float) -> float:
        if self.fdot is not None:
            return float(self.fdot(t))
        return -np.exp(t / self.wall_timescale) / self.wall_timescale

    def growth(self, t: float) -> float:
        """Time factor exp(c t / m) of the Lagrangian."""
        return float(np.exp(self.c * t / self.m))


def probe_wall(p: BilliardParams, t_end: float):
    """Require f > 0 on [0, t_end]; warn when f is not increasing."""
    ts = np.linspace(0.0, t_end, WALL_PROBE_POINTS)
    values = np.array([p.wall(t) for t in ts])
    if np.min(values) <= 0.0:
        t_bad = ts[int(np.argmax(values <= 0.0))]
        raise ScenarioValidationError("t_end", f"billiard wall collapses (f <= 0) near t={t_bad:.4g}")
    if np.any(np.array([p.wall_dot(t) for t in ts]) <= 0.0):
        logger.warning("Billiard wall f(t) is not increasing on the horizon; the wall may catch the particle")


# =============================================================================
# CARTESIAN CHART
# =============================================================================


def _cartesian_system(p: BilliardParams) -> MechanicalSystem:
    m, c = p.m, p.c
    eye = np.eye(2)

    def force(t, q, v):
        g = p.growth(t)
        x, y = q
        xd, yd = v
        return np.array([-2.0 * c * g * (xd * x * y - yd * x**2), 2.0 * c * g * (yd * x * y - xd * y**2)])

    return MechanicalSystem(
        n=2,
        mass=lambda t, q: m * p.growth(t) * eye,
        force=force,
        coordinate_labels=("x", "y"),
        time_dependent=True,
        mass_dq=lambda t, q: np.zeros((2, 2, 2)),
        mass_dt=lambda t, q: c * p.growth(t) * eye,
        potential_dq=lambda t, q: np.zeros(2),
        potential_dt=lambda t, q: 0.0,
        name="billiard",
    )


def _cartesian_transitions(p: BilliardParams) -> tuple:
    def impact(t, q, v):
        x, y = q
        lam = (p.wall_dot(t) - 2.0 * (x * v[0] + y * v[1])) / p.wall(t)
        return q, v + lam * np.array([x, y])

    guard = Guard(
        label=WALL,
        h=lambda t, q: p.wall(t) - q[0] ** 2 - q[1] ** 2,
        approach=lambda t, q, v: p.wall_dot(t) - 2.0 * (q[0] * v[0] + q[1] * v[1]),
        h_dq=lambda t, q: np.array([-2.0 * q[0], -2.0 * q[1]]),
        h_dt=lambda t, q: p.wall_dot(t),
    )
    return ((guard, ImpactLaw.custom(impact)),)


# =============================================================================
# POLAR CHART
# =============================================================================


def radial_reset(p: BilliardParams) -> Callable:
    """Signed reduced reset r_dot+ = r_dot- + r (f_dot - 2 r r_dot-) / f."""

    def reset(label: str, t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        r, rd = float(x[0]), float(xdot[0])
        return np.array([rd + r * (p.wall_dot(t) - 2.0 * r * rd) / p.wall(t)])

    return reset


def _polar_system(p: BilliardParams) -> MechanicalSystem:
    m, c = p.m, p.c

    def mass(t, q):
        r = check_radius(q[0])
        return m * p.growth(t) * np.diag([1.0, r**2])

    def mass_dq(t, q):
        r = check_radius(q[0])
        dM = np.zeros((2, 2, 2))
        dM[0, 1, 1] = 2.0 * m * p.growth(t) * r
        return dM

    def mass_dt(t, q):
        return c * p.growth(t) * np.diag([1.0, q[0] ** 2])

    def force(t, q, v):
        return np.array([2.0 * c * p.growth(t) * q[0] ** 3 * v[1], 0.0])

    return MechanicalSystem(
        n=2,
        mass=mass,
        force=force,
        coordinate_labels=("r", "theta"),
        time_dependent=True,
        mass_dq=mass_dq,
        mass_dt=mass_dt,
        potential_dq=lambda t, q: np.zeros(2),
        potential_dt=lambda t, q: 0.0,
        name="billiard_polar",
    )


def _polar_transitions(p: BilliardParams) -> tuple:
    reset = radial_reset(p)

    def impact(t, q, v):
        rd = reset(WALL, t, q[:1], v[:1])[0]
        return q, np.array([rd, v[1]])

    guard = Guard(
        label=WALL,
        h=lambda t, q: p.wall(t) - q[0] ** 2,
        approach=lambda t, q, v: p.wall_dot(t) - 2.0 * q[0] * v[0],
        h_dq=lambda t, q: np.array([-2.0 * q[0], 0.0]),
        h_dt=lambda t, q: p.wall_dot(t),
    )
    return ((guard, ImpactLaw.custom(impact)),)


def to_polar(s: TangentState) -> TangentState:
    r, th, rd, thd = cartesian_to_polar(s.q[0], s.q[1], s.v[0], s.v[1])
    return TangentState(s.t, [r, th], [rd, thd])


def to_cartesian(s: TangentState) -> TangentState:
    x, y, xd, yd = polar_to_cartesian(s.q[0], s.q[1], s.v[0], s.v[1])
    return TangentState(s.t, [x, y], [xd, yd])


def build_billiard(p: BilliardParams, t_end: float | None = None) -> ModelBundle:
    """Build the billiard in both charts; the momentum map m e^{ct/m} r^2 theta_dot is preserved at impacts."""
    if t_end is not None:
        probe_wall(p, t_end)

    def cartesian_momentum(s: TangentState) -> np.ndarray:
        x, y = s.q
        xd, yd = s.v
        return np.array([p.m * p.growth(s.t) * (x * yd - y * xd)])

    default = to_cartesian(TangentState(0.0, [DEFAULT_R0, DEFAULT_THETA0], [DEFAULT_RDOT0, DEFAULT_THETADOT0]))
    logger.debug("Built billiard with m=%s c=%s", p.m, p.c)
    return ModelBundle(
        name="billiard",
        params=p,
        cartesian=HybridSystem(_cartesian_system(p), _cartesian_transitions(p)),
        polar=HybridSystem(_polar_system(p), _polar_transitions(p)),
        cyclic=CyclicStructure(2, (1,)),
        momentum_rule=lambda label, t, mu: np.array(mu, dtype=float),
        to_polar=to_polar,
        to_cartesian=to_cartesian,
        cartesian_momentum=cartesian_momentum,
        default_initial=default,
        shape_reset=radial_reset(p),
        generators={"rotation": lambda q: np.array([-q[1], q[0]])},
    )
