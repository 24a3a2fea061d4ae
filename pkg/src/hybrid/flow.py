# Module for executing simple hybrid flows:
# - Arc / ImpactEvent / HybridFlowRecord records with per-arc dense output
# - FlowModel adapters binding a phase-space representation to the event-driven integrator
# - integrate_arc: adaptive RK 5(4) stepping with guard localization by bisection
# - run_hybrid_flow / run_hybrid_flow_hamiltonian: alternate arcs and impacts with Zeno protection
#
# Guard convention: the admissible domain is h > 0 and an impact needs approach < 0.

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import RK45, OdeSolution

from hybrid.transitions import Guard, HybridSystem, apply_impact, apply_impact_momentum
from mechanics.errors import HybridSimError, IntegrationFailure, NonFiniteStateError
from mechanics.numerics import MAX_BISECTIONS, NumericsConfig, fd_step
from mechanics.states import CotangentState, TangentState
from mechanics.system import acceleration, momentum_rate, solve_mass

# Configure logging for this module
logger = logging.getLogger(__name__)

# Termination reasons
TIME_HORIZON_REACHED = "time_horizon_reached"
ZENO_DETECTED = "zeno_detected"
INTEGRATION_FAILURE = "integration_failure"
TERMINATIONS = (TIME_HORIZON_REACHED, ZENO_DETECTED, INTEGRATION_FAILURE)

TANGENT = "tangent"
COTANGENT = "cotangent"

# Relative tolerance on the guard derivative check done at setup
GUARD_PROBE_TOL = 1e-3
# Dense-output points per step searched for guard crossings
GUARD_SCAN_POINTS = 16


# =============================================================================
# RECORDS
# =============================================================================


@dataclass(frozen=True)
class Arc:
    """
    One continuous piece of a hybrid flow.

    Samples are the accepted integrator steps; ``solution`` is the stitched dense output over the
    full solver vector (None for zero-length arcs). ``q_slice``/``w_slice`` locate the configuration
    and velocity (or momentum) block inside that vector; ``aux`` holds any extra carried
    coordinates (the cyclic phase of a reduced run).
    """

    t: np.ndarray
    q: np.ndarray
    w: np.ndarray
    phase: str = TANGENT
    solution: OdeSolution | None = None
    q_slice: slice = slice(None)
    w_slice: slice = slice(None)
    aux: np.ndarray | None = None
    aux_slice: slice | None = None
    mu: np.ndarray | None = None

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def _state(self, t, q, w):
        if self.phase == COTANGENT:
            return CotangentState(t, q, w)
        return TangentState(t, q, w)

    @property
    def start_state(self):
        return self._state(self.t[0], self.q[0], self.w[0])

    @property
    def end_state(self):
        return self._state(self.t[-1], self.q[-1], self.w[-1])

    def states(self) -> list:
        return [self._state(t, q, w) for t, q, w in zip(self.t, self.q, self.w, strict=True)]

    def sample(self, ts) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (q, w) on the dense output at times ``ts`` inside the arc."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        if self.solution is None:
            return np.repeat(self.q[:1], ts.size, axis=0), np.repeat(self.w[:1], ts.size, axis=0)
        y = np.atleast_2d(self.solution(np.clip(ts, self.t0, self.t1)).T)
        return y[:, self.q_slice], y[:, self.w_slice]


@dataclass(frozen=True)
class ImpactEvent:
    """Impact at time t on ``guard_label``; pre/post share the configuration."""

    t: float
    pre_state: TangentState | CotangentState
    post_state: TangentState | CotangentState
    guard_label: str
    mu_pre: np.ndarray | None = None
    mu_post: np.ndarray | None = None
    rule_residual: float | None = None
    isotropy_preserved: bool | None = None


@dataclass(frozen=True)
class HybridFlowRecord:
    arcs: tuple[Arc, ...]
    events: tuple[ImpactEvent, ...]
    termination: str
    phase: str = TANGENT
    message: str = ""
    mu_sequence: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination: {self.termination}")

    @property
    def impact_times(self) -> np.ndarray:
        return np.array([ev.t for ev in self.events])

    @property
    def hybrid_intervals(self) -> list[tuple[float, float]]:
        return [(arc.t0, arc.t1) for arc in self.arcs]

    @property
    def t_final(self) -> float:
        return self.arcs[-1].t1 if self.arcs else float("nan")

    def states(self) -> list:
        """All sampled states in time order, pre- and post-impact states both included."""
        out = []
        for arc in self.arcs:
            out.extend(arc.states())
        return out


@dataclass(frozen=True)
class Crossing:
    t: float
    guard_label: str
    y: np.ndarray


# =============================================================================
# FLOW MODELS
# =============================================================================


class FlowModel:
    """
    Binds one phase-space representation to the event-driven integrator.

    Subclasses provide the vector field on the solver vector y, guard evaluation, the recorded
    state and the impact. ``impact`` may return a different model to continue with, which is how
    reduced runs rebuild their reduced system after each collision.
    """

    phase = TANGENT
    q_slice = slice(None)
    w_slice = slice(None)
    aux_slice: slice | None = None
    mu: np.ndarray | None = None

    def __init__(self, guards: list[Guard]):
        self.guards = list(guards)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def h(self, g: Guard, t: float, y: np.ndarray) -> float:
        raise NotImplementedError

    def approach(self, g: Guard, t: float, y: np.ndarray) -> float:
        raise NotImplementedError

    def admits(self, g: Guard, t: float, y: np.ndarray) -> bool:
        raise NotImplementedError

    def state(self, t: float, y: np.ndarray):
        raise NotImplementedError

    def impact(self, label: str, t: float, y: np.ndarray) -> tuple[np.ndarray, FlowModel, dict]:
        raise NotImplementedError


class TangentFlow(FlowModel):
    """Forced Euler-Lagrange flow on y = (q, v)."""

    phase = TANGENT

    def __init__(self, hs: HybridSystem):
        super().__init__(hs.guards)
        self.hs = hs
        n = hs.sys.n
        self.q_slice = slice(0, n)
        self.w_slice = slice(n, 2 * n)

    def rhs(self, t, y):
        q, v = y[self.q_slice], y[self.w_slice]
        return np.concatenate([v, acceleration(self.hs.sys, t, q, v)])

    def h(self, g, t, y):
        return g.value(t, y[self.q_slice])

    def approach(self, g, t, y):
        return g.approach_value(t, y[self.q_slice], y[self.w_slice])

    def admits(self, g, t, y):
        return g.admits(t, y[self.q_slice], y[self.w_slice])

    def state(self, t, y):
        return TangentState(t, y[self.q_slice], y[self.w_slice])

    def impact(self, label, t, y):
        post = apply_impact(self.hs, label, self.state(t, y))
        return post.to_array(), self, {}


class CotangentFlow(FlowModel):
    """Forced Hamiltonian flow on y = (q, p); guards see the velocity M^-1 p."""

    phase = COTANGENT

    def __init__(self, hs: HybridSystem):
        super().__init__(hs.guards)
        self.hs = hs
        n = hs.sys.n
        self.q_slice = slice(0, n)
        self.w_slice = slice(n, 2 * n)

    def _velocity(self, t, y):
        return solve_mass(self.hs.sys, t, y[self.q_slice], y[self.w_slice])

    def rhs(self, t, y):
        dq, dp = momentum_rate(self.hs.sys, t, y[self.q_slice], y[self.w_slice])
        return np.concatenate([dq, dp])

    def h(self, g, t, y):
        return g.value(t, y[self.q_slice])

    def approach(self, g, t, y):
        return g.approach_value(t, y[self.q_slice], self._velocity(t, y))

    def admits(self, g, t, y):
        return g.admits(t, y[self.q_slice], self._velocity(t, y))

    def state(self, t, y):
        return CotangentState(t, y[self.q_slice], y[self.w_slice])

    def impact(self, label, t, y):
        post = apply_impact_momentum(self.hs, label, self.state(t, y))
        return post.to_array(), self, {}


# =============================================================================
# EVENT LOCALIZATION
# =============================================================================


def _event_tolerance(model: FlowModel, t0: float, y0: np.ndarray, cfg: NumericsConfig) -> float:
    scale = max([1.0] + [abs(model.h(g, t0, y0)) for g in model.guards])
    return cfg.event_tol * scale


def _target(h_start: float, tol: float) -> float:
    return 0.0 if h_start > 0.0 else -0.5 * tol


def _bisect(model: FlowModel, g: Guard, interp, t_lo: float, t_hi: float, target: float, tol: float) -> float:
    """Locate h = target on [t_lo, t_hi] given h(t_lo) > target >= h(t_hi)."""
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (t_lo + t_hi)
        gap = model.h(g, mid, interp(mid)) - target
        if abs(gap) <= 0.5 * tol:
            return mid
        if gap > 0.0:
            t_lo = mid
        else:
            t_hi = mid
        if t_hi - t_lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(t_hi)):
            break
    return t_hi


def _build_arc(model: FlowModel, ts: list, ys: list, interps: list) -> Arc:
    t = np.array(ts, dtype=float)
    y = np.array(ys, dtype=float)
    solution = OdeSolution(t, interps) if interps else None
    aux = y[:, model.aux_slice] if model.aux_slice is not None else None
    mu = None if model.mu is None else np.array(model.mu, dtype=float)
    return Arc(
        t=t,
        q=y[:, model.q_slice],
        w=y[:, model.w_slice],
        phase=model.phase,
        solution=solution,
        q_slice=model.q_slice,
        w_slice=model.w_slice,
        aux=aux,
        aux_slice=model.aux_slice,
        mu=mu,
    )


def _scan_guard(
    model: FlowModel,
    g: Guard,
    interp,
    grid: np.ndarray,
    samples: list,
    armed: bool,
    tol: float,
) -> tuple[tuple[float, np.ndarray] | None, bool]:
    """
    Search one accepted step, sampled at ``grid``, for the first admissible crossing of ``g``.

    An armed guard looks for h dropping through its target from above. A disarmed guard first
    re-arms at the first grid point with |h| > 2 tol or approach >= 0 and only then looks for h
    dropping through zero, so a flight that starts and lands inside one step is still caught.

    Returns:
        (crossing time and state or None, whether the guard is armed at the end of the step)
    """
    hv = [model.h(g, t, y) for t, y in zip(grid, samples, strict=True)]
    start, target = 0, _target(hv[0], tol)
    if not armed:
        start = next(
            (k for k in range(grid.size) if abs(hv[k]) > 2.0 * tol or model.approach(g, grid[k], samples[k]) >= 0.0),
            None,
        )
        if start is None:
            return None, False
        target = 0.0
        logger.debug("guard '%s' re-armed at t=%.6g", g.label, grid[start])
    for k in range(start + 1, grid.size):
        if hv[k - 1] > target >= hv[k]:
            tc = _bisect(model, g, interp, grid[k - 1], grid[k], target, tol)
            yc = np.asarray(interp(tc), dtype=float)
            if model.admits(g, tc, yc):
                return (tc, yc), True
    return None, True


def _integrate(
    model: FlowModel,
    t0: float,
    y0: np.ndarray,
    t_end: float,
    cfg: NumericsConfig,
    tol: float,
    armed: dict[str, bool],
    max_step: float = np.inf,
) -> tuple[Arc, Crossing | None, str]:
    """
    Integrate from (t0, y0) until t_end or the first admissible crossing of any guard.

    Returns (arc, crossing or None, failure message or ""). ``armed`` is updated in place as
    disarmed guards re-arm inside the steps.
    """
    y0 = np.asarray(y0, dtype=float)
    ts, ys, interps = [t0], [y0.copy()], []

    # Armed guard already past its band and approaching: fire at t0
    for g in model.guards:
        if not armed[g.label]:
            continue
        h0 = model.h(g, t0, y0)
        if h0 <= _target(h0, tol) and model.admits(g, t0, y0):
            return _build_arc(model, ts, ys, interps), Crossing(t0, g.label, y0.copy()), ""

    if t_end <= t0:
        return _build_arc(model, ts, ys, interps), None, ""

    def fun(t, y):
        dy = model.rhs(t, y)
        if not np.all(np.isfinite(dy)):
            raise NonFiniteStateError(f"vector field is not finite at t={t}")
        return dy

    try:
        solver = RK45(fun, t0, y0, t_end, rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=max_step)
        while solver.status == "running":
            t_prev, y_prev = solver.t, solver.y.copy()
            message = solver.step()
            if solver.status == "failed":
                raise IntegrationFailure(f"integrator stopped at t={solver.t}: {message}")
            t_new, y_new = solver.t, solver.y.copy()
            if not np.all(np.isfinite(y_new)):
                raise IntegrationFailure(f"non-finite state at t={t_new}")
            interp = solver.dense_output()
            grid = np.linspace(t_prev, t_new, GUARD_SCAN_POINTS + 1)
            samples = [y_prev, *(interp(t) for t in grid[1:-1]), y_new]

            candidates = []
            for idx, g in enumerate(model.guards):
                found, armed[g.label] = _scan_guard(model, g, interp, grid, samples, armed[g.label], tol)
                if found is not None:
                    candidates.append((found[0], idx, g.label, found[1]))

            if candidates:
                tc, _, label, yc = min(candidates, key=lambda c: (c[0], c[1]))
                ts.append(tc)
                ys.append(yc)
                interps.append(interp)
                return _build_arc(model, ts, ys, interps), Crossing(tc, label, yc), ""

            ts.append(t_new)
            ys.append(y_new)
            interps.append(interp)
    except (HybridSimError, ArithmeticError) as e:
        logger.error(f"Arc integration failed after t={ts[-1]:.6g}: {e}", exc_info=True)
        return _build_arc(model, ts, ys, interps), None, str(e)

    return _build_arc(model, ts, ys, interps), None, ""


def _probe_guards(model: FlowModel, t0: float, y0: np.ndarray, cfg: NumericsConfig):
    """Check each guard is finite at s0 and its approach matches a finite-difference rate of h."""
    dy = model.rhs(t0, y0)
    dt = fd_step(t0, cfg.fd_step)
    for g in model.guards:
        h0 = model.h(g, t0, y0)
        if not np.isfinite(h0):
            raise NonFiniteStateError(f"guard '{g.label}' is not finite at the initial state")
        rate = (model.h(g, t0 + dt, y0 + dt * dy) - model.h(g, t0 - dt, y0 - dt * dy)) / (2.0 * dt)
        approach = model.approach(g, t0, y0)
        if not np.isfinite(rate) or abs(rate - approach) > GUARD_PROBE_TOL * max(1.0, abs(approach)):
            logger.warning(
                "Guard '%s': approach %.6g does not match dh/dt %.6g at the initial state", g.label, approach, rate
            )


def _return_time(model: FlowModel, g: Guard, t: float, y: np.ndarray, cfg: NumericsConfig) -> float | None:
    """After an impact on ``g``: 2w/|a| for separating rate w >= 0 pulled back at rate a < 0, else None."""
    w = model.approach(g, t, y)
    if w < -cfg.event_tol:
        return None
    w = max(w, 0.0)
    dt = fd_step(t, cfg.fd_step)
    a = (model.approach(g, t + dt, y + dt * model.rhs(t, y)) - w) / dt
    return 2.0 * w / abs(a) if a < 0.0 else None


# =============================================================================
# PUBLIC OPERATIONS
# =============================================================================


def integrate_arc(hs: HybridSystem, s0: TangentState, t_end: float, cfg: NumericsConfig) -> tuple[Arc, Crossing | None]:
    """
    Integrate the forced Euler-Lagrange field from s0 until t_end or the first admissible crossing.

    Returns:
        (arc, crossing): crossing is None when the arc reaches t_end

    Raises:
        IntegrationFailure: on step-size underflow or a non-finite state
    """
    model = TangentFlow(hs)
    y0 = s0.to_array()
    tol = _event_tolerance(model, s0.t, y0, cfg)
    armed = {g.label: True for g in model.guards}
    arc, crossing, failure = _integrate(model, s0.t, y0, t_end, cfg, tol, armed)
    if failure:
        raise IntegrationFailure(failure)
    return arc, crossing


def execute_flow(model: FlowModel, t0: float, y0: np.ndarray, t_end: float, cfg: NumericsConfig) -> HybridFlowRecord:
    """
    Alternate arcs and impacts from (t0, y0) until t_end.

    Terminates with zeno_detected when consecutive impacts are closer than zeno_gap, when a
    post-impact state is predicted to re-impact sooner than that, or past max_impacts. The arc after
    an impact takes steps no longer than its predicted return time.
    Integration failures end the record with integration_failure instead of raising.
    """
    if not t_end > t0:
        raise ValueError(f"t_end must exceed the initial time: t_end={t_end}, t0={t0}")
    y = np.asarray(y0, dtype=float)
    _probe_guards(model, t0, y, cfg)
    tol = _event_tolerance(model, t0, y, cfg)
    armed = {g.label: True for g in model.guards}

    arcs, events, mus = [], [], []
    t = t0
    max_step = np.inf
    termination, message = TIME_HORIZON_REACHED, ""
    while True:
        if model.mu is not None:
            mus.append(np.array(model.mu, dtype=float))
        arc, crossing, failure = _integrate(model, t, y, t_end, cfg, tol, armed, max_step)
        arcs.append(arc)
        if failure:
            termination, message = INTEGRATION_FAILURE, failure
            break
        if crossing is None:
            break

        pre = model.state(crossing.t, crossing.y)
        try:
            y_post, next_model, info = model.impact(crossing.guard_label, crossing.t, crossing.y)
            post = next_model.state(crossing.t, y_post)
        except HybridSimError as e:
            logger.error(f"Impact on '{crossing.guard_label}' failed at t={crossing.t:.6g}: {e}", exc_info=True)
            termination, message = INTEGRATION_FAILURE, str(e)
            break
        events.append(
            ImpactEvent(
                t=crossing.t,
                pre_state=pre,
                post_state=post,
                guard_label=crossing.guard_label,
                mu_pre=info.get("mu_pre"),
                mu_post=info.get("mu_post"),
                rule_residual=info.get("rule_residual"),
                isotropy_preserved=info.get("isotropy_preserved"),
            )
        )
        logger.debug("impact %d on '%s' at t=%.12g", len(events), crossing.guard_label, crossing.t)

        if len(events) >= 2 and events[-1].t - events[-2].t < cfg.zeno_gap:
            termination = ZENO_DETECTED
            message = f"impact gap {events[-1].t - events[-2].t:.3e} below zeno_gap at t={crossing.t:.12g}"
            break
        if len(events) > cfg.max_impacts:
            termination, message = ZENO_DETECTED, f"more than {cfg.max_impacts} impacts"
            break

        model, t, y = next_model, crossing.t, y_post
        armed[crossing.guard_label] = False
        g = next(g for g in model.guards if g.label == crossing.guard_label)
        t_return = _return_time(model, g, t, y, cfg) if t < t_end else None
        if t_return is not None and t_return < cfg.zeno_gap:
            termination = ZENO_DETECTED
            message = f"re-impact predicted within zeno_gap after t={t:.12g}"
            if model.mu is not None:
                mus.append(np.array(model.mu, dtype=float))
            arcs.append(_build_arc(model, [t], [y.copy()], []))
            break
        max_step = t_return or np.inf

    if termination == ZENO_DETECTED:
        logger.warning(f"Zeno behavior detected: {message}")
    logger.info(f"Hybrid flow finished: {len(events)} impacts, {len(arcs)} arcs, termination={termination}")
    return HybridFlowRecord(
        arcs=tuple(arcs),
        events=tuple(events),
        termination=termination,
        phase=model.phase,
        message=message,
        mu_sequence=tuple(mus),
    )


def run_hybrid_flow(hs: HybridSystem, s0: TangentState, t_end: float, cfg: NumericsConfig) -> HybridFlowRecord:
    """Execute the hybrid flow on the tangent side."""
    logger.info(f"Running hybrid flow for '{hs.sys.name}' from t={s0.t} to t={t_end}")
    return execute_flow(TangentFlow(hs), s0.t, s0.to_array(), t_end, cfg)


def run_hybrid_flow_hamiltonian(
    hs: HybridSystem, s0: CotangentState, t_end: float, cfg: NumericsConfig
) -> HybridFlowRecord:
    """Execute the hybrid flow on the cotangent side with momentum-form impacts."""
    logger.info(f"Running Hamiltonian hybrid flow for '{hs.sys.name}' from t={s0.t} to t={t_end}")
    return execute_flow(CotangentFlow(hs), s0.t, s0.to_array(), t_end, cfg)
