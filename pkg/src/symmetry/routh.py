# Module for Routh reduction by cyclic coordinates with external forces:
# - ReducedSystem: Routhian and reduced force on shape space for a fixed momentum value
# - routh_reduce / reduced_field: reduced forced Euler-Lagrange dynamics via the mechanics machinery
# - run_reduced_hybrid_flow: reduced hybrid execution, rebuilding the reduced system after each impact
# - reconstruct: cyclic coordinates by quadrature of the reconstruction equation

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from hybrid.flow import FlowModel, HybridFlowRecord, execute_flow
from hybrid.transitions import HybridSystem, apply_impact
from mechanics.errors import CyclicStructureError, MomentumRuleMismatch, RegularityError, SingularMetricError
from mechanics.numerics import CONDITION_CAP, NumericsConfig
from mechanics.states import StateDerivative, TangentState
from mechanics.system import (
    MechanicalSystem,
    acceleration,
    eval_lagrangian,
    force_components,
    forced_el_field,
    mass_derivatives,
    mass_matrix,
    potential_gradient,
    potential_time_derivative,
)
from symmetry.momentum import (
    CyclicStructure,
    MomentumValue,
    isotropy_preserved,
    momentum_map,
    validate_cyclic_structure,
)

# Configure logging for this module
logger = logging.getLogger(__name__)

# Momentum update rule: (guard_label, t, mu_pre) -> mu_post
MomentumRule = Callable[[str, float, np.ndarray], np.ndarray]
# Shape-space reset: (guard_label, t, x, xdot_pre) -> xdot_post
ShapeReset = Callable[[str, float, np.ndarray, np.ndarray], np.ndarray]

# Tolerance above which a momentum rule disagrees with the lifted impact
RULE_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class ReducedSystem:
    """
    Routh reduction of ``base`` at momentum ``mu`` over the cyclic block of ``cyc``.

    With M split into shape (x) and cyclic (theta) blocks, the eliminated velocity is
    theta_dot = M_theta^-1 (mu - M_theta_x x_dot) and the Routhian reads
    R = 1/2 x_dot^T A x_dot + b^T x_dot - V_eff, with
    A = M_x - M_x_theta M_theta^-1 M_theta_x, b = M_x_theta M_theta^-1 mu, V_eff = V + 1/2 mu^T M_theta^-1 mu.
    The linear term enters the shape equations as a gyroscopic force.
    """

    base: MechanicalSystem
    cyc: CyclicStructure
    mu: MomentumValue

    @property
    def n_shape(self) -> int:
        return self.cyc.n_shape

    def full_q(self, x: np.ndarray, theta: np.ndarray | None = None) -> np.ndarray:
        theta = np.zeros(self.cyc.n_cyclic) if theta is None else theta
        return self.cyc.assemble(np.asarray(x, dtype=float), np.asarray(theta, dtype=float))

    def blocks(self, t: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(M_x, M_x_theta, M_theta) at shape point x."""
        M = mass_matrix(self.base, t, self.full_q(x))
        s, c = list(self.cyc.shape_indices), list(self.cyc.cyclic_indices)
        return M[np.ix_(s, s)], M[np.ix_(s, c)], M[np.ix_(c, c)]

    def _solve_theta_block(self, Mth: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        eig = np.linalg.eigvalsh(Mth)
        if eig[0] <= 0 or eig[-1] / eig[0] > CONDITION_CAP:
            raise RegularityError(f"{self.base.name}: cyclic mass block is not invertible (eig={eig})")
        return np.linalg.solve(Mth, rhs)

    def theta_dot(self, t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        _, Mxth, Mth = self.blocks(t, x)
        return self._solve_theta_block(Mth, self.mu.mu - Mxth.T @ xdot)

    def lift_velocity(self, t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        return self.cyc.assemble(xdot, self.theta_dot(t, x, xdot))

    def routhian(self, t: float, x: np.ndarray, xdot: np.ndarray) -> float:
        """R = L - mu . theta_dot with theta_dot eliminated."""
        thd = self.theta_dot(t, x, xdot)
        L = eval_lagrangian(self.base, TangentState(t, self.full_q(x), self.cyc.assemble(xdot, thd)))
        return float(L - self.mu.mu @ thd)

    def reduced_force(self, t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        """Shape components of F with theta_dot eliminated."""
        F = force_components(self.base, t, self.full_q(x), self.lift_velocity(t, x, xdot))
        return F[list(self.cyc.shape_indices)]

    def reduced_mass(self, t: float, x: np.ndarray) -> np.ndarray:
        Mx, Mxth, Mth = self.blocks(t, x)
        return Mx - Mxth @ self._solve_theta_block(Mth, Mxth.T)

    def effective_potential(self, t: float, x: np.ndarray) -> float:
        _, _, Mth = self.blocks(t, x)
        mu = self.mu.mu
        return float(self.base.potential(t, self.full_q(x)) + 0.5 * mu @ self._solve_theta_block(Mth, mu))

    # Derivatives follow from the base system's with d(M_theta^-1) = -M_theta^-1 dM_theta M_theta^-1

    def _derivative_pieces(self, t: float, x: np.ndarray):
        """(dM/dx_k for each shape k, dM/dt, C = M_theta^-1 M_theta_x, beta = M_theta^-1 mu)."""
        dM, dMt = mass_derivatives(self.base, t, self.full_q(x))
        _, Mxth, Mth = self.blocks(t, x)
        C = self._solve_theta_block(Mth, Mxth.T)
        beta = self._solve_theta_block(Mth, self.mu.mu)
        return dM[list(self.cyc.shape_indices)], dMt, C, beta

    def _reduce_derivative(self, D: np.ndarray, C: np.ndarray) -> np.ndarray:
        """dA for a derivative D of the full mass matrix."""
        s, c = list(self.cyc.shape_indices), list(self.cyc.cyclic_indices)
        return D[np.ix_(s, s)] - D[np.ix_(s, c)] @ C - C.T @ D[np.ix_(c, s)] + C.T @ D[np.ix_(c, c)] @ C

    def reduced_mass_dq(self, t: float, x: np.ndarray) -> np.ndarray:
        dMs, _, C, _ = self._derivative_pieces(t, x)
        return np.array([self._reduce_derivative(D, C) for D in dMs])

    def reduced_mass_dt(self, t: float, x: np.ndarray) -> np.ndarray:
        _, dMt, C, _ = self._derivative_pieces(t, x)
        return self._reduce_derivative(dMt, C)

    def effective_potential_dq(self, t: float, x: np.ndarray) -> np.ndarray:
        dMs, _, _, beta = self._derivative_pieces(t, x)
        c = list(self.cyc.cyclic_indices)
        grad = potential_gradient(self.base, t, self.full_q(x))[list(self.cyc.shape_indices)]
        return grad - 0.5 * np.array([beta @ D[np.ix_(c, c)] @ beta for D in dMs])

    def effective_potential_dt(self, t: float, x: np.ndarray) -> float:
        _, dMt, _, beta = self._derivative_pieces(t, x)
        c = list(self.cyc.cyclic_indices)
        return potential_time_derivative(self.base, t, self.full_q(x)) - 0.5 * float(beta @ dMt[np.ix_(c, c)] @ beta)

    def gyroscopic_force(self, t: float, x: np.ndarray, xdot: np.ndarray) -> np.ndarray:
        """
        G_i = db_i/dt + sum_j (db_i/dx_j - db_j/dx_i) xdot_j for b = M_x_theta beta, zero when
        M_x_theta vanishes.
        """
        dMs, dMt, C, beta = self._derivative_pieces(t, x)
        s, c = list(self.cyc.shape_indices), list(self.cyc.cyclic_indices)
        # db[k, i] = d b_i / d x_k
        db = np.array([D[np.ix_(s, c)] @ beta - C.T @ D[np.ix_(c, c)] @ beta for D in dMs])
        dbdt = dMt[np.ix_(s, c)] @ beta - C.T @ dMt[np.ix_(c, c)] @ beta
        return dbdt + (db.T - db) @ xdot

    def as_mechanical_system(self) -> MechanicalSystem:
        """Shape-space system (A, V_eff) with analytic derivatives; reduced and gyroscopic forces on the force side."""
        return MechanicalSystem(
            n=self.n_shape,
            mass=self.reduced_mass,
            potential=self.effective_potential,
            force=lambda t, x, xd: self.reduced_force(t, x, xd) + self.gyroscopic_force(t, x, xd),
            coordinate_labels=tuple(self.base.coordinate_labels[i] for i in self.cyc.shape_indices),
            time_dependent=self.base.time_dependent,
            mass_dq=self.reduced_mass_dq,
            mass_dt=self.reduced_mass_dt,
            potential_dq=self.effective_potential_dq,
            potential_dt=self.effective_potential_dt,
            fd_step=self.base.fd_step,
            name=f"{self.base.name}/reduced",
        )


def routh_reduce(sys: MechanicalSystem, cyc: CyclicStructure, mu: MomentumValue | np.ndarray) -> ReducedSystem:
    """Build the reduced system at momentum ``mu``."""
    mu = mu if isinstance(mu, MomentumValue) else MomentumValue(mu)
    if mu.mu.size != cyc.n_cyclic:
        raise ValueError(f"momentum has {mu.mu.size} entries, cyclic block has {cyc.n_cyclic}")
    return ReducedSystem(sys, cyc, mu)


def reduced_field(red: ReducedSystem, shape_state: TangentState) -> StateDerivative:
    """Forced Euler-Lagrange field of (R, F_mu) on shape space."""
    try:
        return forced_el_field(red.as_mechanical_system(), shape_state)
    except SingularMetricError as e:
        raise RegularityError(str(e)) from e


# =============================================================================
# REDUCED HYBRID EXECUTION
# =============================================================================


class ReducedFlow(FlowModel):
    """
    Reduced flow on y = (x, theta, x_dot).

    The cyclic phase theta is carried alongside the shape state so that guards are evaluated on
    the lifted full state.
    """

    def __init__(
        self,
        hs: HybridSystem,
        cyc: CyclicStructure,
        red: ReducedSystem,
        rule: MomentumRule | None,
        shape_reset: ShapeReset | None,
    ):
        super().__init__(hs.guards)
        self.hs, self.cyc, self.red = hs, cyc, red
        self.rule, self.shape_reset = rule, shape_reset
        self.shape_sys = red.as_mechanical_system()
        ns, nc = cyc.n_shape, cyc.n_cyclic
        self.q_slice = slice(0, ns)
        self.aux_slice = slice(ns, ns + nc)
        self.w_slice = slice(ns + nc, 2 * ns + nc)
        self.mu = red.mu.mu

    def lift(self, t: float, y: np.ndarray) -> TangentState:
        x, theta, xdot = y[self.q_slice], y[self.aux_slice], y[self.w_slice]
        return TangentState(t, self.cyc.assemble(x, theta), self.red.lift_velocity(t, x, xdot))

    def rhs(self, t, y):
        x, xdot = y[self.q_slice], y[self.w_slice]
        try:
            xddot = acceleration(self.shape_sys, t, x, xdot)
        except SingularMetricError as e:
            raise RegularityError(str(e)) from e
        return np.concatenate([xdot, self.red.theta_dot(t, x, xdot), xddot])

    def h(self, g, t, y):
        return g.value(t, self.lift(t, y).q)

    def approach(self, g, t, y):
        s = self.lift(t, y)
        return g.approach_value(t, s.q, s.v)

    def admits(self, g, t, y):
        s = self.lift(t, y)
        return g.admits(t, s.q, s.v)

    def state(self, t, y):
        return TangentState(t, y[self.q_slice], y[self.w_slice])

    def impact(self, label, t, y):
        pre = self.lift(t, y)
        post = apply_impact(self.hs, label, pre)
        if not isotropy_preserved(self.hs.sys, self.cyc, pre, post):
            raise CyclicStructureError(f"impact on '{label}' at t={t:.6g} does not preserve the cyclic structure")
        mu_pre = self.red.mu.mu
        mu_lifted = momentum_map(self.hs.sys, self.cyc, post).mu
        mu_post = np.asarray(self.rule(label, t, mu_pre), dtype=float) if self.rule is not None else mu_lifted
        residual = float(np.max(np.abs(mu_post - mu_lifted)))
        if residual > RULE_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(mu_lifted)))):
            raise MomentumRuleMismatch(
                f"momentum rule on '{label}' at t={t:.6g} gives {mu_post}, the lifted impact {mu_lifted} "
                f"(residual {residual:.3e})"
            )

        x = y[self.q_slice]
        if self.shape_reset is not None:
            xdot_post = np.asarray(self.shape_reset(label, t, x, y[self.w_slice]), dtype=float)
        else:
            xdot_post = post.v[list(self.cyc.shape_indices)]
        red = routh_reduce(self.hs.sys, self.cyc, mu_post)
        next_model = ReducedFlow(self.hs, self.cyc, red, self.rule, self.shape_reset)
        y_post = np.concatenate([x, y[self.aux_slice], xdot_post])
        logger.debug("reduced impact on '%s' at t=%.12g: mu %s -> %s", label, t, mu_pre, mu_post)
        info = {"mu_pre": mu_pre, "mu_post": mu_post, "rule_residual": residual, "isotropy_preserved": True}
        return y_post, next_model, info


def run_reduced_hybrid_flow(
    hs: HybridSystem,
    cyc: CyclicStructure,
    s0: TangentState,
    t_end: float,
    cfg: NumericsConfig,
    rule: MomentumRule | None = None,
    shape_reset: ShapeReset | None = None,
) -> HybridFlowRecord:
    """
    Execute the reduced hybrid system from the full initial state s0 of ``hs``.

    Arc i is integrated with mu_i; after each impact mu_{i+1} = rule(guard, t, mu_i) (the lifted
    impact's momentum when no rule is given) and the reduced system is rebuilt. Arcs carry shape
    states, the cyclic phase in ``aux`` and their momentum in ``mu``.

    An impact that disagrees with the rule (beyond RULE_RESIDUAL_TOL) or moves the cyclic structure
    ends the record with integration_failure.

    Raises:
        CyclicStructureError: if L or F depend on the cyclic coordinates around s0
    """
    validate_cyclic_structure(hs.sys, cyc, s0, seed=cfg.seed)
    mu0 = momentum_map(hs.sys, cyc, s0)
    red0 = routh_reduce(hs.sys, cyc, mu0)
    model = ReducedFlow(hs, cyc, red0, rule, shape_reset)
    s_idx, c_idx = list(cyc.shape_indices), list(cyc.cyclic_indices)
    y0 = np.concatenate([s0.q[s_idx], s0.q[c_idx], s0.v[s_idx]])
    logger.info(f"Running reduced hybrid flow for '{hs.sys.name}' with mu0={mu0.mu}")
    return execute_flow(model, s0.t, y0, t_end, cfg)


def reconstruct(
    full_sys: MechanicalSystem,
    cyc: CyclicStructure,
    reduced_record: HybridFlowRecord,
    theta0: np.ndarray,
    cfg: NumericsConfig | None = None,
) -> list[TangentState]:
    """
    Rebuild full states on the reduced record's grid.

    On each arc theta_dot = M_theta^-1 (mu_i - M_theta_x x_dot(t)) is integrated from the value at
    the preceding impact (impacts leave the cyclic coordinates unchanged).

    Raises:
        ValueError: if the record carries no momentum sequence
        RegularityError: if the cyclic mass block is singular along the arcs
    """
    if len(reduced_record.mu_sequence) != len(reduced_record.arcs):
        raise ValueError("reduced record has no momentum sequence matching its arcs")
    cfg = cfg or NumericsConfig()
    theta = np.array(theta0, dtype=float).reshape(-1)
    states = []
    for arc, mu in zip(reduced_record.arcs, reduced_record.mu_sequence, strict=True):
        red = routh_reduce(full_sys, cyc, mu)
        if arc.solution is None or arc.t1 <= arc.t0:
            thetas = np.repeat(theta[None, :], arc.t.size, axis=0)
        else:

            def rate(t, th, arc=arc, red=red):
                x, xdot = arc.sample(t)
                return red.theta_dot(t, x[0], xdot[0])

            sol = solve_ivp(
                rate, (arc.t0, arc.t1), theta, method="DOP853", t_eval=arc.t, rtol=cfg.rel_tol, atol=cfg.abs_tol
            )
            if not sol.success:
                raise RegularityError(f"reconstruction quadrature failed: {sol.message}")
            thetas = sol.y.T
        for t, x, xdot, th in zip(arc.t, arc.q, arc.w, thetas, strict=True):
            states.append(TangentState(t, cyc.assemble(x, th), cyc.assemble(xdot, red.theta_dot(t, x, xdot))))
        theta = thetas[-1]
    logger.info(f"Reconstructed {len(states)} states over {len(reduced_record.arcs)} arcs")
    return states
