# Module for scenario files:
# - Scenario record: model, initial state, horizon, mode, numerics, output prefix, seed
# - load_scenario: parse a TOML document of dotted keys, reject unknown keys, validate every field

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields

import numpy as np
import toml

from mechanics.errors import HybridSimError, ScenarioParseError, ScenarioValidationError
from mechanics.numerics import DEFAULT_SEED, NumericsConfig
from mechanics.states import TangentState
from models import MODEL_PARAMS, build_model

# Configure logging for this module
logger = logging.getLogger(__name__)

MODES = ("full", "reduced", "both", "classify", "symcheck")
CHARTS = ("cartesian", "polar")
NUMERICS_FIELDS = tuple(f.name for f in fields(NumericsConfig))
TOP_LEVEL_KEYS = ("t_end", "mode", "seed")
INIT_KEYS = ("q", "v", "t", "chart")
OUTPUT_KEYS = ("prefix", "samples")


@dataclass(frozen=True)
class Scenario:
    model: str
    params: dict
    t_end: float
    mode: str = "full"
    q0: tuple[float, ...] | None = None
    v0: tuple[float, ...] | None = None
    t0: float = 0.0
    chart: str = "cartesian"
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    prefix: str = "out/run"
    samples: int | None = None
    seed: int = DEFAULT_SEED

    def initial_state(self, bundle) -> TangentState:
        """Initial state in the Cartesian chart of ``bundle`` (model default when init is omitted)."""
        if self.q0 is None:
            base = bundle.default_initial
            return TangentState(self.t0, base.q, base.v)
        s = TangentState(self.t0, self.q0, self.v0)
        return bundle.to_cartesian(s) if self.chart == "polar" else s


def _flatten(doc: dict, parent: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        name = f"{parent}.{key}" if parent else key
        if isinstance(value, dict):
            out.update(_flatten(value, name))
        else:
            out[name] = value
    return out


def _number(key: str, value, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float) or not np.isfinite(value):
        raise ScenarioValidationError(key, f"must be a finite number, got {value!r}")
    if positive and value <= 0:
        raise ScenarioValidationError(key, f"must be positive, got {value}")
    return float(value)


def _vector(key: str, value) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ScenarioValidationError(key, f"must be a non-empty list of numbers, got {value!r}")
    return tuple(_number(key, v) for v in value)


def _check_keys(flat: dict):
    for key in flat:
        section, _, rest = key.partition(".")
        if not rest:
            ok = key in TOP_LEVEL_KEYS
        elif section == "model":
            ok = rest == "name" or any(rest in names for names in MODEL_PARAMS.values())
        elif section == "init":
            ok = rest in INIT_KEYS
        elif section == "numerics":
            ok = rest in NUMERICS_FIELDS
        elif section == "output":
            ok = rest in OUTPUT_KEYS
        else:
            ok = False
        if not ok:
            raise ScenarioValidationError(key, "unknown key")


def parse_scenario(doc: dict) -> Scenario:
    """
    Validate a parsed document and build the Scenario.

    Raises:
        ScenarioValidationError: naming the first offending field
    """
    flat = _flatten(doc)
    _check_keys(flat)

    name = flat.get("model.name")
    if not isinstance(name, str):
        raise ScenarioValidationError("model.name", "missing or not a string")
    if name not in MODEL_PARAMS:
        raise ScenarioValidationError("model.name", f"unknown model '{name}' (known: {sorted(MODEL_PARAMS)})")
    params = {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith("model.") and k != "model.name"}

    if "t_end" not in flat:
        raise ScenarioValidationError("t_end", "missing")
    t_end = _number("t_end", flat["t_end"])
    t0 = _number("init.t", flat.get("init.t", 0.0))
    if not t_end > t0:
        raise ScenarioValidationError("t_end", f"must exceed the initial time {t0}, got {t_end}")

    mode = flat.get("mode", "full")
    if mode not in MODES:
        raise ScenarioValidationError("mode", f"must be one of {MODES}, got {mode!r}")
    chart = flat.get("init.chart", "cartesian")
    if chart not in CHARTS:
        raise ScenarioValidationError("init.chart", f"must be one of {CHARTS}, got {chart!r}")

    q0 = v0 = None
    if "init.q" in flat or "init.v" in flat:
        if "init.q" not in flat or "init.v" not in flat:
            raise ScenarioValidationError("init", "init.q and init.v must be given together")
        q0, v0 = _vector("init.q", flat["init.q"]), _vector("init.v", flat["init.v"])
        if len(q0) != len(v0):
            raise ScenarioValidationError("init.v", f"length {len(v0)} differs from init.q length {len(q0)}")

    overrides = {}
    for key in NUMERICS_FIELDS:
        if f"numerics.{key}" in flat:
            value = flat[f"numerics.{key}"]
            overrides[key] = int(_number(f"numerics.{key}", value)) if key in ("max_impacts", "seed") else _number(
                f"numerics.{key}", value
            )
    seed = int(_number("seed", flat.get("seed", DEFAULT_SEED)))
    overrides.setdefault("seed", seed)
    numerics = NumericsConfig().with_overrides(**overrides)

    samples = flat.get("output.samples")
    if samples is not None:
        samples = int(_number("output.samples", samples, positive=True))

    scenario = Scenario(
        model=name,
        params=params,
        t_end=t_end,
        mode=mode,
        q0=q0,
        v0=v0,
        t0=t0,
        chart=chart,
        numerics=numerics,
        prefix=str(flat.get("output.prefix", "out/run")),
        samples=samples,
        seed=seed,
    )
    # builds the model once so parameter and initial-state errors surface at load time
    bundle = build_model(scenario.model, scenario.params, scenario.t_end)
    try:
        s0 = scenario.initial_state(bundle)
    except HybridSimError as e:
        raise ScenarioValidationError("init", str(e)) from e
    if s0.n != bundle.cartesian.sys.n:
        n = bundle.cartesian.sys.n
        raise ScenarioValidationError("init.q", f"model '{name}' needs {n} coordinates, got {s0.n}")
    return scenario


def load_scenario(path: str) -> Scenario:
    """
    Load and validate a scenario file.

    Raises:
        ScenarioParseError: when the file cannot be read or parsed (with the line number)
        ScenarioValidationError: naming the offending field
    """
    if not os.path.isfile(path):
        raise ScenarioParseError(f"scenario file not found: {path}")
    try:
        with open(path, encoding="utf8") as fh:
            doc = toml.load(fh)
    except toml.TomlDecodeError as e:
        logger.error(f"Failed to parse scenario {path}: {e}", exc_info=True)
        raise ScenarioParseError(e.msg, getattr(e, "lineno", None)) from e
    scenario = parse_scenario(doc)
    logger.info(f"Loaded scenario {path}: model={scenario.model} mode={scenario.mode} t_end={scenario.t_end}")
    return scenario
