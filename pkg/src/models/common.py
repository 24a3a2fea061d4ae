# Module for pieces shared by the built-in models:
# - ModelBundle: everything a model exposes (both charts, cyclic structure, momentum rule, ...)
# - Planar polar chart conversions with the origin excluded
# - Parameter validation helpers raising ScenarioValidationError with the offending field

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from hybrid.transitions import HybridSystem
from mechanics.errors import ChartSingularityError, ScenarioValidationError
from mechanics.states import TangentState
from symmetry.momentum import CyclicStructure

# Polar chart is refused below this radius
MIN_RADIUS = 1e-9


@dataclass(frozen=True)
class ModelBundle:
    """
    A built model: Cartesian and polar hybrid systems with matching initial-data conversions.

    ``momentum_rule(label, t, mu)`` is the analytic post-impact momentum, ``shape_reset`` the
    optional shape-space reset of the reduced system, ``cartesian_momentum`` the momentum map
    written in Cartesian coordinates and ``generators`` the Cartesian symmetry vector fields.
    """

    name: str
    params: object
    cartesian: HybridSystem
    polar: HybridSystem
    cyclic: CyclicStructure
    momentum_rule: Callable[[str, float, np.ndarray], np.ndarray]
    to_polar: Callable[[TangentState], TangentState]
    to_cartesian: Callable[[TangentState], TangentState]
    cartesian_momentum: Callable[[TangentState], np.ndarray]
    default_initial: TangentState
    shape_reset: Callable | None = None
    generators: dict[str, Callable[[np.ndarray], np.ndarray]] = field(default_factory=dict)


def check_radius(r: float) -> float:
    if not r >= MIN_RADIUS:
        raise ChartSingularityError(f"polar chart used at r={r} (minimum {MIN_RADIUS})")
    return r


def cartesian_to_polar(x: float, y: float, xd: float, yd: float) -> tuple[float, float, float, float]:
    """(x, y, xdot, ydot) -> (r, theta, rdot, thetadot)."""
    r = check_radius(float(np.hypot(x, y)))
    return r, float(np.arctan2(y, x)), (x * xd + y * yd) / r, (x * yd - y * xd) / r**2


def polar_to_cartesian(r: float, th: float, rd: float, thd: float) -> tuple[float, float, float, float]:
    """(r, theta, rdot, thetadot) -> (x, y, xdot, ydot)."""
    c, s = np.cos(th), np.sin(th)
    return r * c, r * s, rd * c - r * s * thd, rd * s + r * c * thd


def require_positive(name: str, value: float):
    if not np.isfinite(value) or value <= 0:
        raise ScenarioValidationError(f"model.{name}", f"must be positive, got {value}")


def require_unit_interval(name: str, value: float):
    if not np.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ScenarioValidationError(f"model.{name}", f"must lie in [0, 1], got {value}")
