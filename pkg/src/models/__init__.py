"""Built-in models and their registry by scenario name."""

import logging

from mechanics.errors import ScenarioValidationError
from models.billiard import BilliardParams, build_billiard
from models.common import ModelBundle
from models.disk import DiskParams, build_rolling_disk
from models.particle import ParticleParams, build_particle

# Configure logging for this module
logger = logging.getLogger(__name__)

# Scenario-settable parameters per model name (callable wall evaluators are code-only)
MODEL_PARAMS = {
    "disk_fixed": ("m", "R", "k", "c", "e", "alpha"),
    "disk_moving": ("m", "R", "k", "c", "alpha", "wall_speed"),
    "billiard": ("m", "c", "wall_offset", "wall_timescale"),
    "particle": ("m", "g", "e"),
}

DISK_MOVING_SPEED = 0.05


def _check_params(name: str, params: dict):
    allowed = MODEL_PARAMS[name]
    for key, value in params.items():
        if key not in allowed:
            raise ScenarioValidationError(f"model.{key}", f"unknown parameter for model '{name}' (allowed: {allowed})")
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ScenarioValidationError(f"model.{key}", f"must be a number, got {value!r}")


def build_model(name: str, params: dict | None = None, t_end: float | None = None) -> ModelBundle:
    """
    Build a registered model.

    Args:
        name: one of "disk_fixed", "disk_moving", "billiard", "particle"
        params: numeric parameter overrides
        t_end: horizon used to probe wall functions

    Raises:
        ScenarioValidationError: for unknown names, unknown parameters or invalid values
    """
    params = dict(params or {})
    if name not in MODEL_PARAMS:
        raise ScenarioValidationError("model.name", f"unknown model '{name}' (known: {sorted(MODEL_PARAMS)})")
    _check_params(name, params)
    logger.info(f"Building model '{name}' with {params or 'defaults'}")
    if name == "billiard":
        return build_billiard(BilliardParams(**params), t_end)
    if name == "particle":
        return build_particle(ParticleParams(**params))
    if name == "disk_moving":
        params.setdefault("wall_speed", DISK_MOVING_SPEED)
        if params["wall_speed"] <= 0:
            raise ScenarioValidationError("model.wall_speed", "must be positive for the moving-wall disk")
    return build_rolling_disk(DiskParams(**params), t_end)


__all__ = [
    "MODEL_PARAMS",
    "BilliardParams",
    "DiskParams",
    "ModelBundle",
    "ParticleParams",
    "build_billiard",
    "build_model",
    "build_particle",
    "build_rolling_disk",
]
