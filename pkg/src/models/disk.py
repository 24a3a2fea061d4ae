# Module for the rolling disk with dissipation between two rough walls:
# - DiskParams with validation
# - Cartesian system q = (x, y, vartheta) and polar system q = (r, theta, vartheta)
# - Wall guards with the rolling condition x_dot = R vartheta_dot as guard constraint
# - Rolling impact map, momentum update rule on the rolling set, fixed and moving top wall

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
    require_unit_interval,
)
from symmetry.momentum import CyclicStructure

# Configure logging for this module
logger = logging.getLogger(__name__)

LOW_WALL = "wall_low"
HIGH_WALL = "wall_high"

# Points used to probe the moving wall over the horizon
WALL_PROBE_POINTS = 200


@dataclass(frozen=True)
class DiskParams:
    """
    Disk of mass m, radius R and gyration radius k (default R / sqrt(2), homogeneous disk).

    Walls: the centre moves between y = R and y = alpha R - R. With ``wall_motion`` (or a nonzero
    ``wall_speed``, giving f(t) = alpha R + wall_speed t) the top wall sits at y = f(t) and the
    centre's upper guard is y = f(t) - R.
    """

    m: float = 1.0
    R: float = 1.0
    k: float | None = None
    c: float = 0.05
    e: float = 1.0
    alpha: float = 4.0
    wall_speed: float = 0.0
    wall_motion: Callable[[float], float] | None = None
    wall_rate: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", self.R / np.sqrt(2.0))
        for name in ("m", "R", "k", "c"):
            require_positive(name, getattr(self, name))
        require_unit_interval("e", self.e)
        if not self.alpha > 1.0:
            raise ScenarioValidationError("model.alpha", f"must exceed 1, got {self.alpha}")
        if (self.wall_motion is None) != (self.wall_rate is None):
            raise ScenarioValidationError("model.wall_motion", "wall_motion and wall_rate must be given together")
        if not np.isfinite(self.wall_speed) or self.wall_speed < 0:
            raise ScenarioValidationError("model.wall_speed", f"must be non-negative, got {self.wall_speed}")

    @property
    def moving(self) -> bool:
        return self.wall_motion is not None or self.wall_speed > 0.0

    def wall(self, t: float) -> float:
        """Height of the top wall."""
        if self.wall_motion is not None:
            return float(self.wall_motion(t))
        return self.alpha * self.R + self.wall_speed * t

    def wall_dot(self, t: float) -> float:
        if self.wall_rate is not None:
            return float(self.wall_rate(t))
        return self.wall_speed

    def top(self, t: float) -> float:
        """Height of the centre when touching the top wall."""
        return self.wall(t) - self.R


def probe_wall(p: DiskParams, t_end: float):
    """Check f(t) >= alpha R on [0, t_end]."""
    ts = np.linspace(0.0, t_end, WALL_PROBE_POINTS)
    low = min(p.wall(t) for t in ts)
    if low < p.alpha * p.R - 1e-12:
        raise ScenarioValidationError(
            "model.wall_motion", f"wall height {low:.6g} drops below alpha R = {p.alpha * p.R}"
        )


# =============================================================================
# IMPACT AND MOMENTUM
# =============================================================================


def rolling_impact(p: DiskParams, e: float, xd: float, yd: float, td: float) -> tuple[float, float, float]:
    """(x_dot, y_dot, vartheta_dot) after a wall impact: rolling projection and restitution e."""
    s = p.k**2 + p.R**2
    return (p.R**2 * xd + p.k**2 * p.R * td) / s, -e * yd, (p.R * xd + p.k**2 * td) / s


def momentum_rule(p: DiskParams, e: float) -> Callable[[str, float, np.ndarray], np.ndarray]:
    """
    Post-impact (mu1, mu2) on the rolling set x_dot = R vartheta_dot at wall height y_w:
    mu1 -> -e mu1 - (1 + e) y_w R mu2 / k^2, mu2 unchanged.
    """

    def rule(label: str, t: float, mu: np.ndarray) -> np.ndarray:
        y_w = p.R if label == LOW_WALL else p.top(t)
        return np.array([-e * mu[0] - (1.0 + e) * y_w * p.R * mu[1] / p.k**2, mu[1]])

    return rule


# =============================================================================
# CARTESIAN CHART
# =============================================================================


def _cartesian_system(p: DiskParams) -> MechanicalSystem:
    m, k, c = p.m, p.k, p.c
    M = np.diag([m, m, m * k**2])

    def force(t, q, v):
        x, y = q[0], q[1]
        xd, yd = v[0], v[1]
        return np.array([-2.0 * c * (xd * x * y - yd * x**2), 2.0 * c * (yd * x * y - xd * y**2), 0.0])

    return MechanicalSystem(
        n=3,
        mass=lambda t, q: M,
        force=force,
        coordinate_labels=("x", "y", "vartheta"),
        mass_dq=lambda t, q: np.zeros((3, 3, 3)),
        potential_dq=lambda t, q: np.zeros(3),
        name="disk",
    )


def _cartesian_transitions(p: DiskParams, e: float) -> tuple:
    def rolling(t, q, v):
        return np.array([v[0] - p.R * v[2]])

    def impact(t, q, v):
        return q, np.array(rolling_impact(p, e, v[0], v[1], v[2]))

    low = Guard(
        label=LOW_WALL,
        h=lambda t, q: q[1] - p.R,
        approach=lambda t, q, v: v[1],
        h_dq=lambda t, q: np.array([0.0, 1.0, 0.0]),
        h_dt=lambda t, q: 0.0,
        constraint=rolling,
    )
    high = Guard(
        label=HIGH_WALL,
        h=lambda t, q: p.top(t) - q[1],
        approach=lambda t, q, v: p.wall_dot(t) - v[1],
        h_dq=lambda t, q: np.array([0.0, -1.0, 0.0]),
        h_dt=lambda t, q: p.wall_dot(t),
        constraint=rolling,
    )
    law = ImpactLaw.custom(impact)
    return ((low, law), (high, law))


# =============================================================================
# POLAR CHART
# =============================================================================


def _polar_system(p: DiskParams) -> MechanicalSystem:
    m, k, c = p.m, p.k, p.c

    def mass(t, q):
        r = check_radius(q[0])
        return np.diag([m, m * r**2, m * k**2])

    def mass_dq(t, q):
        r = check_radius(q[0])
        dM = np.zeros((3, 3, 3))
        dM[0, 1, 1] = 2.0 * m * r
        return dM

    def force(t, q, v):
        return np.array([2.0 * c * q[0] ** 3 * v[1], 0.0, 0.0])

    return MechanicalSystem(
        n=3,
        mass=mass,
        force=force,
        coordinate_labels=("r", "theta", "vartheta"),
        mass_dq=mass_dq,
        potential_dq=lambda t, q: np.zeros(3),
        name="disk_polar",
    )


def _polar_transitions(p: DiskParams, e: float) -> tuple:
    def height_rate(q, v):
        return v[0] * np.sin(q[1]) + q[0] * np.cos(q[1]) * v[1]

    def rolling(t, q, v):
        return np.array([v[0] * np.cos(q[1]) - q[0] * np.sin(q[1]) * v[1] - p.R * v[2]])

    def impact(t, q, v):
        x, y, xd, yd = polar_to_cartesian(q[0], q[1], v[0], v[1])
        xd, yd, td = rolling_impact(p, e, xd, yd, v[2])
        _, _, rd, thd = cartesian_to_polar(x, y, xd, yd)
        return q, np.array([rd, thd, td])

    def normal(q):
        return np.array([np.sin(q[1]), q[0] * np.cos(q[1]), 0.0])

    low = Guard(
        label=LOW_WALL,
        h=lambda t, q: q[0] * np.sin(q[1]) - p.R,
        approach=lambda t, q, v: height_rate(q, v),
        h_dq=lambda t, q: normal(q),
        h_dt=lambda t, q: 0.0,
        constraint=rolling,
    )
    high = Guard(
        label=HIGH_WALL,
        h=lambda t, q: p.top(t) - q[0] * np.sin(q[1]),
        approach=lambda t, q, v: p.wall_dot(t) - height_rate(q, v),
        h_dq=lambda t, q: -normal(q),
        h_dt=lambda t, q: p.wall_dot(t),
        constraint=rolling,
    )
    law = ImpactLaw.custom(impact)
    return ((low, law), (high, law))


def to_polar(s: TangentState) -> TangentState:
    r, th, rd, thd = cartesian_to_polar(s.q[0], s.q[1], s.v[0], s.v[1])
    return TangentState(s.t, [r, th, s.q[2]], [rd, thd, s.v[2]])


def to_cartesian(s: TangentState) -> TangentState:
    x, y, xd, yd = polar_to_cartesian(s.q[0], s.q[1], s.v[0], s.v[1])
    return TangentState(s.t, [x, y, s.q[2]], [xd, yd, s.v[2]])


def build_rolling_disk(p: DiskParams, t_end: float | None = None) -> ModelBundle:
    """
    Build the rolling disk in both charts.

    The moving-wall variant uses the fixed-wall impact map with e = 1 and no wall-velocity term.
    """
    e = 1.0 if p.moving else p.e
    if p.moving and p.e != 1.0:
        logger.warning(f"Moving-wall disk uses e=1; ignoring e={p.e}")
    if p.moving and t_end is not None:
        probe_wall(p, t_end)

    def cartesian_momentum(s: TangentState) -> np.ndarray:
        x, y, _ = s.q
        xd, yd, td = s.v
        return np.array([p.m * (x * yd - y * xd), p.m * p.k**2 * td])

    mid = 0.5 * (p.R + p.top(0.0))
    default = TangentState(0.0, [0.5, mid, 0.0], [0.6, -0.8, 0.6 / p.R])
    name = "disk_moving" if p.moving else "disk_fixed"
    logger.debug("Built %s with R=%s k=%s c=%s e=%s", name, p.R, p.k, p.c, e)
    return ModelBundle(
        name=name,
        params=p,
        cartesian=HybridSystem(_cartesian_system(p), _cartesian_transitions(p, e)),
        polar=HybridSystem(_polar_system(p), _polar_transitions(p, e)),
        cyclic=CyclicStructure(3, (1, 2)),
        momentum_rule=momentum_rule(p, e),
        to_polar=to_polar,
        to_cartesian=to_cartesian,
        cartesian_momentum=cartesian_momentum,
        default_initial=default,
        generators={
            "rotation": lambda q: np.array([-q[1], q[0], 0.0]),
            "spin": lambda q: np.array([0.0, 0.0, 1.0]),
        },
    )
