# Module for numerical conventions shared by all packages:
# - Env-driven defaults for tolerances, Zeno thresholds and finite-difference steps
# - NumericsConfig record consumed by integration, event location and probing
# - Central finite-difference helpers used when a model has no analytic derivatives

import logging
import os
from dataclasses import dataclass, fields, replace

import numpy as np

from mechanics.errors import ScenarioValidationError

# Configure logging for this module
logger = logging.getLogger(__name__)

# Defaults (env-driven, read once at import)
DEFAULT_REL_TOL = float(os.environ.get("HYBRID_REL_TOL", "1e-9"))
DEFAULT_ABS_TOL = float(os.environ.get("HYBRID_ABS_TOL", "1e-11"))
DEFAULT_EVENT_TOL = float(os.environ.get("HYBRID_EVENT_TOL", "1e-10"))
DEFAULT_ZENO_GAP = float(os.environ.get("HYBRID_ZENO_GAP", "1e-7"))
DEFAULT_MAX_IMPACTS = int(float(os.environ.get("HYBRID_MAX_IMPACTS", "1e6")))
DEFAULT_FD_STEP = float(os.environ.get("HYBRID_FD_STEP", "1e-6"))
DEFAULT_SEED = int(os.environ.get("HYBRID_SEED", "0"))

# Condition-number cap before a mass matrix counts as singular
CONDITION_CAP = 1e12
# Relative symmetry tolerance for mass matrices
SYMMETRY_TOL = 1e-12
# Maximum bisection steps when locating a guard crossing
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class NumericsConfig:
    """Tolerances and limits for integration, event location and probing."""

    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    event_tol: float = DEFAULT_EVENT_TOL
    zeno_gap: float = DEFAULT_ZENO_GAP
    max_impacts: int = DEFAULT_MAX_IMPACTS
    fd_step: float = DEFAULT_FD_STEP
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for f in fields(self):
            if f.name == "seed":
                continue
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0:
                raise ScenarioValidationError(f"numerics.{f.name}", f"must be positive, got {value}")
        if self.rel_tol < self.abs_tol * 1e-6:
            raise ScenarioValidationError("numerics.rel_tol", "must be at least abs_tol * 1e-6")

    def with_overrides(self, **overrides) -> "NumericsConfig":
        """Return a copy with the given fields replaced (unknown names raise)."""
        known = {f.name for f in fields(self)}
        for name in overrides:
            if name not in known:
                raise ScenarioValidationError(f"numerics.{name}", "unknown numerics field")
        return replace(self, **overrides)

    def refined(self, factor: float = 10.0) -> "NumericsConfig":
        """Tighter integrator tolerances, used for refinement-stability checks."""
        return replace(self, rel_tol=self.rel_tol / factor, abs_tol=self.abs_tol / factor)


def fd_step(x: float, base: float = DEFAULT_FD_STEP) -> float:
    return base * max(1.0, abs(x))


def central_gradient(func, x: np.ndarray, base: float = DEFAULT_FD_STEP) -> np.ndarray:
    """Central-difference derivative of ``func`` (scalar or array valued) w.r.t. each entry of ``x``.

    The result has the derivative index first: ``out[k] = d func / d x_k``.
    """
    x = np.asarray(x, dtype=float)
    parts = []
    for k in range(x.size):
        h = fd_step(x[k], base)
        xp = x.copy()
        xm = x.copy()
        xp[k] += h
        xm[k] -= h
        parts.append((np.asarray(func(xp), dtype=float) - np.asarray(func(xm), dtype=float)) / (2.0 * h))
    return np.array(parts)


def central_derivative(func, t: float, base: float = DEFAULT_FD_STEP):
    """Central-difference derivative of ``func(t)`` at ``t``."""
    h = fd_step(t, base)
    return (np.asarray(func(t + h), dtype=float) - np.asarray(func(t - h), dtype=float)) / (2.0 * h)
