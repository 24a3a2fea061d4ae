# Module for executing scenarios:
# - run_scenario: full / reduced / both / classify / symcheck modes, artifacts and exit status
# - run_batch: independent scenarios concurrently, each on its own output prefix
#
# Exit statuses: 0 success, 2 validation error, 3 simulation failure, 4 Zeno-terminated.

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from cli.export import (
    export_plot_data,
    sample_record,
    write_events_csv,
    write_momenta_csv,
    write_report,
    write_trajectory_csv,
)
from cli.scenario import Scenario
from hybrid.flow import INTEGRATION_FAILURE, ZENO_DETECTED, HybridFlowRecord, run_hybrid_flow
from mechanics.errors import HybridSimError, ScenarioValidationError
from mechanics.states import TangentState
from mechanics.system import legendre_forward
from models import ModelBundle, build_model
from symmetry.momentum import annotate_momentum, classify_momentum_map, momentum_map
from symmetry.noether import check_symmetry, check_symmetry_hamiltonian
from symmetry.routh import reconstruct, run_reduced_hybrid_flow

# Configure logging for this module
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_FAILURE = 3
EXIT_ZENO = 4

# Symmetry-check samples drawn around the initial state
SYMCHECK_SAMPLES = 10
SYMCHECK_SPREAD = 0.05


@dataclass
class RunResult:
    scenario: Scenario
    status: int = EXIT_OK
    files: list[str] = field(default_factory=list)
    report: dict = field(default_factory=dict)


def _status_of(record: HybridFlowRecord) -> int:
    if record.termination == ZENO_DETECTED:
        return EXIT_ZENO
    if record.termination == INTEGRATION_FAILURE:
        return EXIT_FAILURE
    return EXIT_OK


def evaluate_record(record: HybridFlowRecord, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(q, w) at each time, taken from the last arc starting at or before it."""
    starts = np.array([arc.t0 for arc in record.arcs])
    qs, ws = [], []
    for t in ts:
        arc = record.arcs[max(0, int(np.searchsorted(starts, t, side="right")) - 1)]
        q, w = arc.sample([t])
        qs.append(q[0])
        ws.append(w[0])
    return np.array(qs), np.array(ws)


def _cartesian_momenta(bundle: ModelBundle, record: HybridFlowRecord) -> HybridFlowRecord:
    events = tuple(
        replace(ev, mu_pre=bundle.cartesian_momentum(ev.pre_state), mu_post=bundle.cartesian_momentum(ev.post_state))
        for ev in record.events
    )
    return replace(record, events=events)


def _momentum_rows(record: HybridFlowRecord, mu_of) -> list:
    return [(arc.t0, arc.t1, mu_of(arc)) for arc in record.arcs]


# =============================================================================
# MODES
# =============================================================================


def _run_full(sc: Scenario, bundle: ModelBundle, s0: TangentState, result: RunResult) -> HybridFlowRecord:
    record = _cartesian_momenta(bundle, run_hybrid_flow(bundle.cartesian, s0, sc.t_end, sc.numerics))
    labels = bundle.cartesian.sys.coordinate_labels
    t, q, w = sample_record(record, sc.samples)
    prefix = f"{sc.prefix}_full" if sc.mode == "both" else sc.prefix
    files = [f"{prefix}_trajectory.csv", f"{prefix}_events.csv", f"{prefix}_momenta.csv"]
    write_trajectory_csv(files[0], labels, t, q, w, record.phase)
    write_events_csv(files[1], labels, record, mu_size=bundle.cyclic.n_cyclic)
    write_momenta_csv(files[2], _momentum_rows(record, lambda arc: bundle.cartesian_momentum(arc.start_state)))
    files += export_plot_data(prefix, t, np.hypot(q[:, 0], q[:, 1]), q[:, :2], record.impact_times)
    result.files += files

    mus = np.array([bundle.cartesian_momentum(s) for s in record.states()])
    result.report.update(
        {
            "full.termination": record.termination,
            "full.impacts": len(record.events),
            "full.t_final": record.t_final,
            "full.momentum_spread": float(np.max(np.ptp(mus, axis=0))) if mus.size else 0.0,
        }
    )
    if record.message:
        result.report["full.message"] = record.message
    return record


def _run_reduced(sc: Scenario, bundle: ModelBundle, s0: TangentState, result: RunResult):
    polar = bundle.to_polar(s0)
    cyc = bundle.cyclic
    record = run_reduced_hybrid_flow(
        bundle.polar, cyc, polar, sc.t_end, sc.numerics, rule=bundle.momentum_rule, shape_reset=bundle.shape_reset
    )
    states = reconstruct(bundle.polar.sys, cyc, record, polar.q[list(cyc.cyclic_indices)], sc.numerics)
    cart = [bundle.to_cartesian(s) for s in states]

    shape_labels = [bundle.polar.sys.coordinate_labels[i] for i in cyc.shape_indices]
    t, x, xdot = sample_record(record, sc.samples)
    prefix = f"{sc.prefix}_reduced" if sc.mode == "both" else sc.prefix
    files = [f"{prefix}_trajectory.csv", f"{prefix}_events.csv", f"{prefix}_momenta.csv"]
    write_trajectory_csv(files[0], shape_labels, t, x, xdot, record.phase)
    write_events_csv(files[1], shape_labels, record, mu_size=cyc.n_cyclic)
    write_momenta_csv(files[2], [(a.t0, a.t1, mu) for a, mu in zip(record.arcs, record.mu_sequence, strict=True)])
    recon_labels = bundle.cartesian.sys.coordinate_labels
    write_trajectory_csv(
        f"{prefix}_reconstructed.csv",
        recon_labels,
        np.array([s.t for s in cart]),
        np.array([s.q for s in cart]),
        np.array([s.v for s in cart]),
        "tangent",
    )
    files.append(f"{prefix}_reconstructed.csv")
    xy = np.array([s.q[:2] for s in cart])
    files += export_plot_data(prefix, t, x[:, 0], xy, record.impact_times)
    result.files += files

    residuals = [ev.rule_residual for ev in record.events if ev.rule_residual is not None]
    result.report.update(
        {
            "reduced.termination": record.termination,
            "reduced.impacts": len(record.events),
            "reduced.mu_initial": " ".join(f"{m:.17g}" for m in record.mu_sequence[0]),
            "reduced.mu_final": " ".join(f"{m:.17g}" for m in record.mu_sequence[-1]),
            "reduced.max_rule_residual": max(residuals, default=0.0),
            "reduced.isotropy_preserved": all(ev.isotropy_preserved for ev in record.events),
        }
    )
    if record.message:
        result.report["reduced.message"] = record.message
    return record, cart


def _compare(sc: Scenario, full: HybridFlowRecord, reduced: HybridFlowRecord, cart: list, result: RunResult):
    t_stop = min(full.t_final, reduced.t_final)
    grid = np.linspace(full.arcs[0].t0, t_stop, sc.samples or 2000)
    q_full, _ = evaluate_record(full, grid)
    r_red, _ = evaluate_record(reduced, grid)
    radius_dev = float(np.max(np.abs(np.hypot(q_full[:, 0], q_full[:, 1]) - r_red[:, 0])))

    times = np.array([s.t for s in cart if s.t <= t_stop])
    q_at, _ = evaluate_record(full, times)
    recon = np.array([s.q for s in cart if s.t <= t_stop])
    path_dev = float(np.max(np.abs(q_at[:, :2] - recon[:, :2]))) if len(times) else 0.0
    n = min(len(full.events), len(reduced.events))
    tau_dev = float(np.max(np.abs(full.impact_times[:n] - reduced.impact_times[:n]))) if n else 0.0
    result.report.update(
        {
            "compare.max_radius_deviation": radius_dev,
            "compare.max_path_deviation": path_dev,
            "compare.max_impact_time_deviation": tau_dev,
        }
    )
    logger.info(f"Full vs reduced: radius deviation {radius_dev:.3e}, path deviation {path_dev:.3e}")


def _run_classify(sc: Scenario, bundle: ModelBundle, s0: TangentState, result: RunResult) -> HybridFlowRecord:
    polar = bundle.to_polar(s0)
    verdicts = []
    record = None
    for cfg in (sc.numerics, sc.numerics.refined()):
        rec = annotate_momentum(bundle.polar.sys, bundle.cyclic, run_hybrid_flow(bundle.polar, polar, sc.t_end, cfg))
        report = classify_momentum_map(bundle.polar, bundle.cyclic, rec, cfg)
        verdicts.append(report)
        record = record or rec
    write_events_csv(f"{sc.prefix}_events.csv", bundle.polar.sys.coordinate_labels, record, bundle.cyclic.n_cyclic)
    result.files.append(f"{sc.prefix}_events.csv")
    base, refined = verdicts
    result.report.update(
        {
            "classify.termination": record.termination,
            "classify.impacts": len(record.events),
            "classify.verdict": base.verdict,
            "classify.verdict_refined": refined.verdict,
            "classify.stable": base.verdict == refined.verdict,
            "classify.max_violation": base.max_violation,
            "classify.max_spread": base.max_spread,
        }
    )
    return record


def _run_symcheck(sc: Scenario, bundle: ModelBundle, s0: TangentState, result: RunResult):
    sys = bundle.cartesian.sys
    rng = np.random.default_rng(sc.seed)
    samples = [s0] + [
        TangentState(
            s0.t,
            s0.q + SYMCHECK_SPREAD * rng.standard_normal(sys.n),
            s0.v + SYMCHECK_SPREAD * rng.standard_normal(sys.n),
        )
        for _ in range(SYMCHECK_SAMPLES - 1)
    ]
    for name, X in bundle.generators.items():
        lag = check_symmetry(sys, X, samples, sc.numerics)
        ham = check_symmetry_hamiltonian(sys, X, [legendre_forward(sys, s) for s in samples], sc.numerics)
        result.report.update(
            {
                f"symcheck.{name}.max_residual": lag.max_residual,
                f"symcheck.{name}.max_drift": lag.max_drift,
                f"symcheck.{name}.hamiltonian_max_residual": ham.max_residual,
                f"symcheck.{name}.hamiltonian_max_drift": ham.max_drift,
                f"symcheck.{name}.is_symmetry": lag.is_symmetry and ham.is_symmetry,
            }
        )


# =============================================================================
# ENTRY POINTS
# =============================================================================


def run_scenario(sc: Scenario) -> RunResult:
    """
    Run one scenario and write its artifacts under ``sc.prefix``.

    Failures never escape: they are logged and reflected in the status and the report.
    """
    result = RunResult(sc, report={"model": sc.model, "mode": sc.mode, "t_end": sc.t_end, "seed": sc.seed})
    logger.info(f"Running scenario model={sc.model} mode={sc.mode} prefix={sc.prefix}")
    try:
        bundle = build_model(sc.model, sc.params, sc.t_end)
        s0 = sc.initial_state(bundle)
        result.report["mu_initial"] = " ".join(
            f"{m:.17g}" for m in momentum_map(bundle.polar.sys, bundle.cyclic, bundle.to_polar(s0)).mu
        )
        records = []
        if sc.mode in ("full", "both"):
            records.append(_run_full(sc, bundle, s0, result))
        if sc.mode in ("reduced", "both"):
            reduced, cart = _run_reduced(sc, bundle, s0, result)
            records.append(reduced)
            if sc.mode == "both":
                _compare(sc, records[0], reduced, cart, result)
        if sc.mode == "classify":
            records.append(_run_classify(sc, bundle, s0, result))
        if sc.mode == "symcheck":
            _run_symcheck(sc, bundle, s0, result)
        result.status = max([EXIT_OK] + [_status_of(r) for r in records])
    except ScenarioValidationError as e:
        logger.error(f"Scenario validation failed: {e}", exc_info=True)
        result.status = EXIT_VALIDATION
        result.report["error"] = str(e)
    except (HybridSimError, ValueError) as e:
        logger.error(f"Simulation failed: {e}", exc_info=True)
        result.status = EXIT_FAILURE
        result.report["error"] = str(e)

    result.report["status"] = result.status
    report_path = f"{sc.prefix}_report.txt"
    write_report(report_path, result.report)
    result.files.append(report_path)
    logger.info(f"Scenario finished with status {result.status}")
    return result


async def run_batch(scenarios: list[Scenario]) -> list[RunResult]:
    """Run independent scenarios concurrently in worker threads."""
    logger.info(f"Running batch of {len(scenarios)} scenarios")
    results = await asyncio.gather(*(asyncio.to_thread(run_scenario, sc) for sc in scenarios))
    for res in results:
        status = "✅" if res.status == EXIT_OK else "❌"
        logger.info(f"{status} {res.scenario.prefix}: status {res.status}")
    return list(results)
