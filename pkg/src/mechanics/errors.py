# Exceptions shared by every package of the simulator.
# Library code raises these; the command line maps them to exit statuses.


class HybridSimError(Exception):
    """Base class for all simulator failures."""


class DimensionMismatchError(HybridSimError, ValueError):
    """State or evaluator output has the wrong length."""


class NonFiniteStateError(HybridSimError, ValueError):
    """An evaluator returned NaN or infinity."""


class SingularMetricError(HybridSimError, ValueError):
    """Mass matrix is not symmetric positive-definite or is too ill-conditioned."""


class DegenerateGuardError(HybridSimError, ValueError):
    """Guard normal vanishes at the impact point."""


class RegularityError(HybridSimError, ValueError):
    """Cyclic block of the mass matrix cannot be inverted (reduction impossible)."""


class ChartSingularityError(HybridSimError, ValueError):
    """Polar chart evaluated too close to the origin."""


class UnknownGuardError(HybridSimError, KeyError):
    """No transition registered under the requested guard label."""


class IntegrationFailure(HybridSimError, RuntimeError):
    """Adaptive integrator could not continue (step underflow or non-finite state)."""


class ScenarioValidationError(HybridSimError, ValueError):
    """Scenario field failed validation."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ScenarioParseError(HybridSimError, ValueError):
    """Scenario file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


class CyclicStructureError(HybridSimError, ValueError):
    """Lagrangian or force depends on a declared cyclic coordinate, or an impact moved one."""


class MomentumRuleMismatch(HybridSimError, RuntimeError):
    """Momentum update rule disagrees with the momentum of the lifted post-impact state."""
