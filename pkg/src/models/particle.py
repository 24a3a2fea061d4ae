# Module for a planar particle pulled onto a floor:
# - ParticleParams: mass, pull g toward the floor y = 0, restitution e
# - Newtonian impacts on the floor; e = 0 gives the plastic (Zeno) case
# - x is cyclic, so the same chart serves both the full and the reduced runs

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from hybrid.transitions import Guard, HybridSystem, ImpactLaw
from mechanics.states import TangentState
from mechanics.system import MechanicalSystem
from models.common import ModelBundle, require_positive, require_unit_interval
from symmetry.momentum import CyclicStructure

# Configure logging for this module
logger = logging.getLogger(__name__)

FLOOR = "floor"


@dataclass(frozen=True)
class ParticleParams:
    m: float = 1.0
    g: float = 1.0
    e: float = 1.0

    def __post_init__(self):
        require_positive("m", self.m)
        require_positive("g", self.g)
        require_unit_interval("e", self.e)


def _system(p: ParticleParams) -> MechanicalSystem:
    M = p.m * np.eye(2)
    return MechanicalSystem(
        n=2,
        mass=lambda t, q: M,
        potential=lambda t, q: p.m * p.g * q[1],
        coordinate_labels=("x", "y"),
        mass_dq=lambda t, q: np.zeros((2, 2, 2)),
        potential_dq=lambda t, q: np.array([0.0, p.m * p.g]),
        name="particle",
    )


def build_particle(p: ParticleParams) -> ModelBundle:
    """
    Particle released at height g/2 with no vertical speed: the first impact is at t = 1.

    With e = 0 the post-impact normal speed vanishes while the pull persists, so the flow reports
    Zeno termination at the first impact.
    """
    floor = Guard(
        label=FLOOR,
        h=lambda t, q: q[1],
        approach=lambda t, q, v: v[1],
        h_dq=lambda t, q: np.array([0.0, 1.0]),
        h_dt=lambda t, q: 0.0,
    )
    hs = HybridSystem(_system(p), ((floor, ImpactLaw.newtonian(p.e)),))

    def identity(s: TangentState) -> TangentState:
        return s

    logger.debug("Built particle with m=%s g=%s e=%s", p.m, p.g, p.e)
    return ModelBundle(
        name="particle",
        params=p,
        cartesian=hs,
        polar=hs,
        cyclic=CyclicStructure(2, (0,)),
        momentum_rule=lambda label, t, mu: np.array(mu, dtype=float),
        to_polar=identity,
        to_cartesian=identity,
        cartesian_momentum=lambda s: np.array([p.m * s.v[0]]),
        default_initial=TangentState(0.0, [0.0, 0.5 * p.g], [0.3, 0.0]),
        generators={"translation": lambda q: np.array([1.0, 0.0])},
    )
