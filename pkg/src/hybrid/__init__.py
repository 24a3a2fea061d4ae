"""Simple hybrid systems: guards, impact laws and event-driven execution of hybrid flows."""

from hybrid.flow import (
    INTEGRATION_FAILURE,
    TIME_HORIZON_REACHED,
    ZENO_DETECTED,
    Arc,
    HybridFlowRecord,
    ImpactEvent,
    integrate_arc,
    run_hybrid_flow,
    run_hybrid_flow_hamiltonian,
)
from hybrid.transitions import (
    Guard,
    HybridSystem,
    ImpactLaw,
    apply_impact,
    apply_impact_momentum,
    newtonian_impact,
    newtonian_impact_momentum,
)

__all__ = [
    "INTEGRATION_FAILURE",
    "TIME_HORIZON_REACHED",
    "ZENO_DETECTED",
    "Arc",
    "Guard",
    "HybridFlowRecord",
    "HybridSystem",
    "ImpactEvent",
    "ImpactLaw",
    "apply_impact",
    "apply_impact_momentum",
    "integrate_arc",
    "newtonian_impact",
    "newtonian_impact_momentum",
    "run_hybrid_flow",
    "run_hybrid_flow_hamiltonian",
]
