# Module for momentum maps of cyclic coordinates and their behavior at impacts:
# - CyclicStructure: split of the configuration indices into a cyclic block and a shape block
# - momentum_map: cyclic block of the Legendre transform
# - validate_cyclic_structure / isotropy_preserved: cyclic-shift invariance of L and F, before runs and across impacts
# - classify_momentum_map: hybrid / generalized / neither, from recorded events plus seeded probe impacts
# - check_hybrid_constant: drift along arcs and jumps across impacts of any state function

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from hybrid.flow import COTANGENT, HybridFlowRecord
from hybrid.transitions import Guard, HybridSystem, apply_impact
from mechanics.errors import CyclicStructureError, DimensionMismatchError, HybridSimError, NonFiniteStateError
from mechanics.numerics import NumericsConfig, central_gradient
from mechanics.states import CotangentState, TangentState
from mechanics.system import (
    MechanicalSystem,
    eval_lagrangian,
    force_components,
    legendre_inverse,
    mass_matrix,
)

# Configure logging for this module
logger = logging.getLogger(__name__)

# Momentum comparison tolerance (relative to max(1, |mu|))
MOMENTUM_TOL = 1e-8
# Invariance tolerance for the cyclic-coordinate probe
INVARIANCE_TOL = 1e-9
# Probe impacts per event level
PROBE_COUNT = 20
PROBE_ATTEMPTS = 50
PROBE_SPREAD = 0.05

HYBRID = "hybrid"
GENERALIZED = "generalized"
NEITHER = "neither"


@dataclass(frozen=True)
class CyclicStructure:
    """Cyclic (theta) and shape (x) blocks of the configuration indices."""

    n: int
    cyclic_indices: tuple[int, ...]
    shape_indices: tuple[int, ...] = ()

    def __post_init__(self):
        cyclic = tuple(int(i) for i in self.cyclic_indices)
        shape = tuple(int(i) for i in self.shape_indices) or tuple(i for i in range(self.n) if i not in cyclic)
        if not cyclic:
            raise DimensionMismatchError("cyclic structure needs at least one cyclic index")
        if set(cyclic) & set(shape):
            raise DimensionMismatchError(f"cyclic {cyclic} and shape {shape} indices overlap")
        if sorted(cyclic + shape) != list(range(self.n)):
            raise DimensionMismatchError(f"cyclic {cyclic} and shape {shape} do not cover 0..{self.n - 1}")
        object.__setattr__(self, "cyclic_indices", cyclic)
        object.__setattr__(self, "shape_indices", shape)

    @property
    def n_cyclic(self) -> int:
        return len(self.cyclic_indices)

    @property
    def n_shape(self) -> int:
        return len(self.shape_indices)

    def assemble(self, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Full vector from its shape and cyclic blocks."""
        out = np.empty(self.n)
        out[list(self.shape_indices)] = x
        out[list(self.cyclic_indices)] = theta
        return out


@dataclass(frozen=True)
class MomentumValue:
    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        if not np.all(np.isfinite(mu)):
            raise NonFiniteStateError(f"momentum value is not finite: {mu}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)


def momentum_map(sys: MechanicalSystem, cyc: CyclicStructure, s: TangentState | CotangentState) -> MomentumValue:
    """Cyclic components of the momentum M(t,q) v (or of p directly for a cotangent state)."""
    if isinstance(s, CotangentState):
        return MomentumValue(s.p[list(cyc.cyclic_indices)])
    p = mass_matrix(sys, s.t, s.q) @ s.v
    return MomentumValue(p[list(cyc.cyclic_indices)])


def _invariance_violation(sys: MechanicalSystem, idx: list[int], s: TangentState, shift: np.ndarray) -> str | None:
    """Compare L and F at s and at s shifted along the cyclic coordinates ``idx``."""
    shifted_q = s.q.copy()
    shifted_q[idx] += shift
    L0, L1 = eval_lagrangian(sys, s), eval_lagrangian(sys, TangentState(s.t, shifted_q, s.v))
    F0, F1 = force_components(sys, s.t, s.q, s.v), force_components(sys, s.t, shifted_q, s.v)
    scale = max(1.0, float(np.max(np.abs(F0))))
    if abs(L1 - L0) > INVARIANCE_TOL * max(1.0, abs(L0)):
        return "Lagrangian depends on cyclic coordinates"
    if np.max(np.abs(F1 - F0)) > INVARIANCE_TOL * scale:
        return "force depends on cyclic coordinates"
    if np.max(np.abs(F0[idx])) > INVARIANCE_TOL * scale:
        return "force has components along cyclic directions"
    return None


def validate_cyclic_structure(
    sys: MechanicalSystem, cyc: CyclicStructure, reference: TangentState, seed: int = 0, samples: int = 10
):
    """
    Probe that L and F do not depend on the cyclic coordinates and that F has no cyclic components.

    Samples are random perturbations of ``reference``.

    Raises:
        CyclicStructureError: if any sample violates the invariance
    """
    if cyc.n != sys.n:
        raise DimensionMismatchError(f"cyclic structure has n={cyc.n}, system has n={sys.n}")
    rng = np.random.default_rng(seed)
    idx = list(cyc.cyclic_indices)
    for _ in range(samples):
        q = reference.q + PROBE_SPREAD * rng.standard_normal(sys.n) * np.maximum(1.0, np.abs(reference.q))
        v = reference.v + rng.standard_normal(sys.n) * max(1.0, float(np.linalg.norm(reference.v)))
        problem = _invariance_violation(sys, idx, TangentState(reference.t, q, v), rng.uniform(-np.pi, np.pi, len(idx)))
        if problem is not None:
            raise CyclicStructureError(f"{sys.name}: {problem} {idx}")
    logger.debug("cyclic structure %s validated on %d samples", idx, samples)


def isotropy_preserved(sys: MechanicalSystem, cyc: CyclicStructure, pre: TangentState, post: TangentState) -> bool:
    """
    True when an impact leaves the cyclic coordinates in place and the cyclic structure still
    holds at the post-impact state, so the group fixing the momentum is the same on both sides.
    """
    idx = list(cyc.cyclic_indices)
    if not np.array_equal(pre.q[idx], post.q[idx]):
        return False
    return _invariance_violation(sys, idx, post, np.ones(len(idx))) is None


def annotate_momentum(sys: MechanicalSystem, cyc: CyclicStructure, record: HybridFlowRecord) -> HybridFlowRecord:
    """Return the record with mu_pre / mu_post filled on every event."""
    events = tuple(
        replace(
            ev,
            mu_pre=momentum_map(sys, cyc, ev.pre_state).mu,
            mu_post=momentum_map(sys, cyc, ev.post_state).mu,
        )
        for ev in record.events
    )
    return replace(record, events=events)


# =============================================================================
# CLASSIFICATION
# =============================================================================


@dataclass(frozen=True)
class ProbeLevel:
    """Probe results around one recorded event."""

    guard_label: str
    t: float
    mu_pre: np.ndarray
    event_mu_post: np.ndarray
    probe_mu_post: np.ndarray
    event_in_band: bool

    @property
    def spread(self) -> float:
        """Largest disagreement among post-impact momenta sharing this pre-impact level."""
        posts = list(self.probe_mu_post)
        if self.event_in_band:
            posts.append(self.event_mu_post)
        if len(posts) < 2:
            return 0.0
        posts = np.array(posts)
        return float(np.max(posts.max(axis=0) - posts.min(axis=0)))


@dataclass(frozen=True)
class ClassificationReport:
    verdict: str
    pairs: list[tuple[np.ndarray, np.ndarray]]
    max_violation: float
    max_spread: float
    levels: list[ProbeLevel] = field(default_factory=list)

    def summary(self) -> str:
        return (
            f"verdict={self.verdict} events={len(self.pairs)} "
            f"max_violation={self.max_violation:.3e} max_spread={self.max_spread:.3e}"
        )


def _project_to_guard(g: Guard, t: float, q: np.ndarray, tol: float) -> np.ndarray | None:
    """Newton iterations along the gradient onto h(t, q) = 0."""
    for _ in range(50):
        hval = g.value(t, q)
        if abs(hval) <= tol:
            return q
        dh = g.normal(t, q)
        norm2 = float(dh @ dh)
        if norm2 < 1e-24:
            return None
        q = q - hval * dh / norm2
    return q if abs(g.value(t, q)) <= tol else None


def _project_velocity(
    sys: MechanicalSystem,
    cyc: CyclicStructure,
    g: Guard,
    t: float,
    q: np.ndarray,
    v: np.ndarray,
    mu: np.ndarray,
    step: float,
) -> np.ndarray:
    """Least-norm correction of v onto {cyclic rows of M v = mu, constraint(v) = 0}."""
    M = mass_matrix(sys, t, q)
    rows = [M[list(cyc.cyclic_indices), :]]
    rhs = [mu]
    if g.constraint is not None:
        c0 = np.atleast_1d(np.asarray(g.constraint(t, q, np.zeros_like(v)), dtype=float))
        C = central_gradient(lambda vv: np.atleast_1d(g.constraint(t, q, vv)), v, step).reshape(sys.n, -1).T
        rows.append(C)
        rhs.append(-c0)
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    correction, *_ = np.linalg.lstsq(A, A @ v - b, rcond=None)
    return v - correction


def _probe_level(
    hs: HybridSystem,
    cyc: CyclicStructure,
    label: str,
    pre: TangentState,
    cfg: NumericsConfig,
    rng: np.random.Generator,
    n_probes: int,
) -> list[np.ndarray]:
    g, _ = hs.transition(label)
    sys = hs.sys
    mu = momentum_map(sys, cyc, pre).mu
    posts = []
    attempts = 0
    vscale = max(1.0, float(np.linalg.norm(pre.v)))
    while len(posts) < n_probes and attempts < PROBE_ATTEMPTS * n_probes:
        attempts += 1
        try:
            q = pre.q + PROBE_SPREAD * rng.standard_normal(sys.n) * np.maximum(1.0, np.abs(pre.q))
            q = _project_to_guard(g, pre.t, q, cfg.event_tol)
            if q is None:
                continue
            v = pre.v + 0.5 * vscale * rng.standard_normal(sys.n)
            v = _project_velocity(sys, cyc, g, pre.t, q, v, mu, cfg.fd_step)
            if g.approach_value(pre.t, q, v) >= 0.0:
                continue
            post = apply_impact(hs, label, TangentState(pre.t, q, v))
            posts.append(momentum_map(sys, cyc, post).mu)
        except HybridSimError as e:
            logger.debug("probe rejected on '%s': %s", label, e)
    if len(posts) < n_probes:
        logger.warning(f"Probe exhaustion on guard '{label}': {len(posts)}/{n_probes} probes after {attempts} attempts")
    return posts


def classify_momentum_map(
    hs: HybridSystem,
    cyc: CyclicStructure,
    record: HybridFlowRecord,
    cfg: NumericsConfig | None = None,
    n_probes: int = PROBE_COUNT,
) -> ClassificationReport:
    """
    Classify the momentum map of ``cyc`` against the impacts of ``hs``.

    Verdicts:
    - hybrid: mu_post equals mu_pre at every event and probe
    - generalized: mu_post is a function of mu_pre (probes on the same guard and level agree)
    - neither: otherwise

    Raises:
        ValueError: if the record has no events
        CyclicStructureError: if L or F depend on the cyclic coordinates near the first event
    """
    if not record.events:
        raise ValueError("classification needs a record with at least one impact")
    cfg = cfg or NumericsConfig()
    rng = np.random.default_rng(cfg.seed)
    sys = hs.sys
    reference = record.events[0].pre_state
    if record.phase == COTANGENT:
        reference = legendre_inverse(sys, reference)
    validate_cyclic_structure(sys, cyc, reference, seed=cfg.seed)

    pairs, levels = [], []
    max_violation = 0.0
    hybrid_ok = True
    for ev in record.events:
        pre, post = ev.pre_state, ev.post_state
        if record.phase == COTANGENT:
            pre, post = legendre_inverse(sys, pre), legendre_inverse(sys, post)
        mu_pre = momentum_map(sys, cyc, pre).mu
        mu_post = momentum_map(sys, cyc, post).mu
        pairs.append((mu_pre, mu_post))
        tol = MOMENTUM_TOL * max(1.0, float(np.max(np.abs(mu_pre))))

        probes = _probe_level(hs, cyc, ev.guard_label, pre, cfg, rng, n_probes)
        g, _ = hs.transition(ev.guard_label)
        in_band = g.constraint_residual(pre.t, pre.q, pre.v) <= g.band
        level = ProbeLevel(ev.guard_label, ev.t, mu_pre, mu_post, np.array(probes).reshape(-1, cyc.n_cyclic), in_band)
        levels.append(level)

        deviations = [np.max(np.abs(mu_post - mu_pre))] + [np.max(np.abs(p - mu_pre)) for p in probes]
        max_violation = max(max_violation, float(max(deviations)))
        if max(deviations) > tol:
            hybrid_ok = False

    max_spread = max(level.spread for level in levels)
    if hybrid_ok:
        verdict = HYBRID
    elif all(level.spread <= MOMENTUM_TOL * max(1.0, float(np.max(np.abs(level.mu_pre)))) for level in levels):
        verdict = GENERALIZED
    else:
        verdict = NEITHER
    report = ClassificationReport(verdict, pairs, max_violation, max_spread, levels)
    logger.info(f"Momentum map classification: {report.summary()}")
    return report


# =============================================================================
# HYBRID CONSTANTS
# =============================================================================


@dataclass(frozen=True)
class HybridConstantReport:
    max_drift: float
    max_jump: float
    tolerance: float

    @property
    def is_constant(self) -> bool:
        return self.max_drift <= self.tolerance and self.max_jump <= self.tolerance


def check_hybrid_constant(
    record: HybridFlowRecord,
    f: Callable[[TangentState | CotangentState], float | Sequence[float]],
    tol: float | None = None,
) -> HybridConstantReport:
    """Max drift of f along each arc and max jump of f across each impact."""
    if not record.arcs:
        raise ValueError("record has no arcs")
    f0 = np.atleast_1d(np.asarray(f(record.arcs[0].start_state), dtype=float))
    tol = tol if tol is not None else 1e-7 * max(1.0, float(np.max(np.abs(f0))))

    max_drift = 0.0
    for arc in record.arcs:
        values = np.array([np.atleast_1d(np.asarray(f(s), dtype=float)) for s in arc.states()])
        max_drift = max(max_drift, float(np.max(np.abs(values - values[0]))))
    max_jump = 0.0
    for ev in record.events:
        post = np.atleast_1d(np.asarray(f(ev.post_state), dtype=float))
        jump = post - np.atleast_1d(np.asarray(f(ev.pre_state), dtype=float))
        max_jump = max(max_jump, float(np.max(np.abs(jump))))
    return HybridConstantReport(max_drift, max_jump, tol)
