# Module for symmetry checks of forced systems:
# - check_symmetry: residual X^c(L) - F(X) of the complete lift, plus drift of X^v(L) = <M v, X> along arcs
# - check_symmetry_hamiltonian: residual X^(H) + F(X) of the cotangent lift, plus drift of <p, X> along arcs

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from mechanics.numerics import NumericsConfig, central_gradient
from mechanics.states import CotangentState, TangentState
from mechanics.system import (
    MechanicalSystem,
    acceleration,
    eval_hamiltonian,
    eval_lagrangian,
    force_components,
    mass_matrix,
    momentum_rate,
    solve_mass,
)

# Configure logging for this module
logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]

# Length of the monitoring arc started from each sample
DRIFT_HORIZON = 1.0
DRIFT_POINTS = 50


@dataclass(frozen=True)
class SymmetryReport:
    max_residual: float
    max_drift: float
    residuals: np.ndarray
    tolerance: float

    @property
    def is_symmetry(self) -> bool:
        return self.max_residual <= self.tolerance


def _jacobian(X: VectorField, q: np.ndarray, step: float) -> np.ndarray:
    """out[k, i] = dX_i / dq_k."""
    return central_gradient(lambda qq: np.asarray(X(qq), dtype=float), q, step).reshape(q.size, q.size)


def lagrangian_residual(sys: MechanicalSystem, X: VectorField, s: TangentState) -> float:
    """X^c(L) - F(X) at s, with X^c = X^i d/dq^i + (dX^i/dq^j) v^j d/dv^i."""
    step = sys.fd_step
    dLdq = central_gradient(lambda qq: eval_lagrangian(sys, TangentState(s.t, qq, s.v)), s.q, step).reshape(-1)
    dLdv = mass_matrix(sys, s.t, s.q) @ s.v
    Xq = np.asarray(X(s.q), dtype=float)
    Xc = dLdq @ Xq + dLdv @ (_jacobian(X, s.q, step).T @ s.v)
    return float(Xc - force_components(sys, s.t, s.q, s.v) @ Xq)


def hamiltonian_residual(sys: MechanicalSystem, X: VectorField, s: CotangentState) -> float:
    """X^(H) + F(X) at s, with X^ = X^i d/dq^i - p_j (dX^j/dq^i) d/dp_i."""
    step = sys.fd_step
    dHdq = central_gradient(lambda qq: eval_hamiltonian(sys, CotangentState(s.t, qq, s.p)), s.q, step).reshape(-1)
    v = solve_mass(sys, s.t, s.q, s.p)
    Xq = np.asarray(X(s.q), dtype=float)
    Xhat = dHdq @ Xq - v @ _jacobian(X, s.q, step) @ s.p
    return float(Xhat + force_components(sys, s.t, s.q, v) @ Xq)


def _drift(rhs, y0: np.ndarray, t0: float, monitor, cfg: NumericsConfig) -> float:
    ts = np.linspace(t0, t0 + DRIFT_HORIZON, DRIFT_POINTS)
    sol = solve_ivp(rhs, (ts[0], ts[-1]), y0, method="DOP853", t_eval=ts, rtol=cfg.rel_tol, atol=cfg.abs_tol)
    if not sol.success:
        logger.warning(f"Symmetry monitoring arc stopped early: {sol.message}")
    values = np.array([monitor(t, y) for t, y in zip(sol.t, sol.y.T, strict=True)])
    return float(np.max(np.abs(values - values[0]))) if values.size else 0.0


def check_symmetry(
    sys: MechanicalSystem,
    X: VectorField,
    samples: Sequence[TangentState],
    cfg: NumericsConfig | None = None,
    tol: float = 1e-8,
    monitor_arcs: int = 1,
) -> SymmetryReport:
    """
    Evaluate the forced-symmetry residual of X at every sample and the drift of X^v(L) = <M v, X>
    along short continuous arcs started from the first ``monitor_arcs`` samples.
    """
    cfg = cfg or NumericsConfig()
    n = sys.n
    residuals = np.array([lagrangian_residual(sys, X, s) for s in samples])

    def rhs(t, y):
        return np.concatenate([y[n:], acceleration(sys, t, y[:n], y[n:])])

    def monitor(t, y):
        return float((mass_matrix(sys, t, y[:n]) @ y[n:]) @ np.asarray(X(y[:n]), dtype=float))

    max_drift = max((_drift(rhs, s.to_array(), s.t, monitor, cfg) for s in samples[:monitor_arcs]), default=0.0)
    report = SymmetryReport(float(np.max(np.abs(residuals))), max_drift, residuals, tol)
    logger.info(f"Symmetry check on '{sys.name}': max residual {report.max_residual:.3e}, drift {max_drift:.3e}")
    return report


def check_symmetry_hamiltonian(
    sys: MechanicalSystem,
    X: VectorField,
    samples: Sequence[CotangentState],
    cfg: NumericsConfig | None = None,
    tol: float = 1e-8,
    monitor_arcs: int = 1,
) -> SymmetryReport:
    """Cotangent-side counterpart of check_symmetry, monitoring <p, X> along arcs."""
    cfg = cfg or NumericsConfig()
    n = sys.n
    residuals = np.array([hamiltonian_residual(sys, X, s) for s in samples])

    def rhs(t, y):
        dq, dp = momentum_rate(sys, t, y[:n], y[n:])
        return np.concatenate([dq, dp])

    def monitor(t, y):
        return float(y[n:] @ np.asarray(X(y[:n]), dtype=float))

    max_drift = max((_drift(rhs, s.to_array(), s.t, monitor, cfg) for s in samples[:monitor_arcs]), default=0.0)
    report = SymmetryReport(float(np.max(np.abs(residuals))), max_drift, residuals, tol)
    logger.info(f"Hamiltonian symmetry check on '{sys.name}': max residual {report.max_residual:.3e}")
    return report
