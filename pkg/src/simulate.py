# =============================================================================
#
# Command-line entry point for the hybrid forced mechanical systems simulator.
#
# Usage:
#   python src/simulate.py scenarios/billiard_c0005.toml [more.toml ...]
#       [--mode full|reduced|both|classify|symcheck] [--out PREFIX] [--seed N] [--tol X] [--batch]
#
# Each scenario file names a model, its parameters, the initial state and the horizon. Outputs are
# written under the scenario's output prefix (or --out). The process exit code is the worst status
# across scenarios: 0 success, 2 invalid scenario, 3 simulation failure, 4 Zeno-terminated run.
#
# Environment:
#   HYBRID_LOG_LEVEL        logging level (default INFO)
#   HYBRID_REL_TOL, HYBRID_ABS_TOL, HYBRID_EVENT_TOL, HYBRID_ZENO_GAP, HYBRID_MAX_IMPACTS,
#   HYBRID_FD_STEP, HYBRID_SEED, HYBRID_EXPORT_SAMPLES
#                           numeric defaults when a scenario leaves them unset

import argparse
import asyncio
import logging
import os
import sys
from dataclasses import replace

from cli.runner import EXIT_FAILURE, EXIT_OK, EXIT_VALIDATION, run_batch, run_scenario
from cli.scenario import MODES, Scenario, load_scenario
from mechanics.errors import HybridSimError, ScenarioParseError, ScenarioValidationError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simulate", description="Simulate hybrid forced mechanical systems.")
    parser.add_argument("configs", nargs="+", help="scenario TOML files")
    parser.add_argument("--mode", choices=MODES, help="override the scenario mode")
    parser.add_argument("--out", help="override the output prefix (suffixed by the file stem in a batch)")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--tol", type=float, help="relative integration tolerance (absolute is tol/100)")
    parser.add_argument("--batch", action="store_true", help="run the scenarios concurrently")
    return parser


def apply_overrides(sc: Scenario, args: argparse.Namespace, stem: str, many: bool) -> Scenario:
    """Fold command-line overrides into a loaded scenario."""
    changes = {}
    if args.mode:
        changes["mode"] = args.mode
    if args.out:
        changes["prefix"] = f"{args.out}_{stem}" if many else args.out
    numerics = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        numerics["seed"] = args.seed
    if args.tol is not None:
        if not args.tol > 0:
            raise ScenarioValidationError("--tol", f"must be positive, got {args.tol}")
        numerics.update(rel_tol=args.tol, abs_tol=args.tol / 100)
    if numerics:
        changes["numerics"] = sc.numerics.with_overrides(**numerics)
    return replace(sc, **changes) if changes else sc


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("HYBRID_LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    many = len(args.configs) > 1

    scenarios = []
    for path in args.configs:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            scenarios.append(apply_overrides(load_scenario(path), args, stem, many))
            logging.info(f"✅ Scenario {path} loaded")
        except ScenarioParseError as e:
            where = f" (line {e.line})" if e.line else ""
            logging.error(f"❌ Cannot parse {path}{where}: {e}")
            return EXIT_VALIDATION
        except ScenarioValidationError as e:
            logging.error(f"❌ Invalid scenario {path}: field '{e.field}': {e}")
            return EXIT_VALIDATION

    try:
        if args.batch:
            results = asyncio.run(run_batch(scenarios))
        else:
            results = [run_scenario(sc) for sc in scenarios]
    except HybridSimError as e:
        logging.error(f"❌ Simulation aborted: {e}", exc_info=True)
        return EXIT_FAILURE

    status = max([EXIT_OK] + [r.status for r in results])
    for res in results:
        mark = "✅" if res.status == EXIT_OK else "❌"
        logging.info(f"{mark} {res.scenario.prefix}: status {res.status}, {len(res.files)} files")
    return status


if __name__ == "__main__":
    sys.exit(main())
