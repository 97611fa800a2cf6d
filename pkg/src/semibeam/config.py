"""Experiment configuration files.

Configurations are TOML documents.  Every key is checked against the schema
below; unknown keys are rejected with their dotted path so that typos never
fall back silently to defaults.

    modes = 32
    seed = 0
    output = "runs/demo"          # output path prefix (optional)

    [model]
    variant = "System02"
    exponents = [1.0, 1.0, 1.0]
    gamma1 = 1.0                  # ... any ModelParameters coefficient

    [simulate]   t_end, samples, window, initial, initial_decay, fallback_dt, gap_tolerance
    [spectrum]   abscissa_limit
    [resolvent]  lambda = {min, max, count, log}, probes
    [gevrey]     lambda, tolerance
    [audit]      lambda, trials, ceiling
    [sweep]      region, points, triples, lambda, tolerance
    [check]      states, tolerance

A run manifest (JSON) written by the CLI carries the resolved configuration
under ``"config"`` and can be passed back as ``--config`` to repeat a run.
"""

from __future__ import annotations

import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, ParameterError
from .params import ModelParameters
from .spectral import eigenvalue

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

__all__ = [
    "LambdaSpec",
    "SimulateSpec",
    "SpectrumSpec",
    "ResolventSpec",
    "GevreySpec",
    "AuditSpec",
    "SweepSpec",
    "CheckSpec",
    "ExperimentConfig",
    "parse_config",
    "config_from_dict",
]


@dataclass(frozen=True)
class LambdaSpec:
    """Frequency grid; ``None`` bounds are resolved against the mode count."""

    min: float | None = None
    max: float | None = None
    count: int = 50
    log: bool = True

    def resolve(self, N, l, default_min, default_max):
        lo = default_min if self.min is None else self.min
        hi = default_max if self.max is None else self.max
        if not (0.0 < lo < hi) and not (self.count == 1 and lo > 0.0):
            raise ConfigError(f"lambda grid needs 0 < min < max, got [{lo}, {hi}]", key="lambda")
        cap = eigenvalue(max(1, N // 2), l)
        if hi > cap * (1.0 + 1e-12):
            raise ConfigError(f"lambda max {hi:g} exceeds the validity limit mu_(N/2) = {cap:g} "
                              f"for N = {N}", key="lambda.max")
        return float(lo), float(hi)


@dataclass(frozen=True)
class SimulateSpec:
    t_end: float = 40.0
    samples: int = 401
    window: tuple | None = None
    initial: str = "default"
    initial_decay: float = 2.0
    fallback_dt: float = 1e-3
    gap_tolerance: float = 0.10


@dataclass(frozen=True)
class SpectrumSpec:
    abscissa_limit: float = -1e-6


@dataclass(frozen=True)
class ResolventSpec:
    lam: LambdaSpec = LambdaSpec(min=0.1, count=50)
    probes: int = 2


@dataclass(frozen=True)
class GevreySpec:
    lam: LambdaSpec = LambdaSpec(min=10.0, count=60)
    tolerance: float = 0.15


@dataclass(frozen=True)
class AuditSpec:
    lam: LambdaSpec = LambdaSpec(min=1.0, count=24)
    trials: int = 20
    ceiling: float = math.inf


@dataclass(frozen=True)
class SweepSpec:
    region: str = "unit"
    points: int = 3
    triples: tuple | None = None
    lam: LambdaSpec = LambdaSpec(min=10.0, count=40)
    tolerance: float = 0.15


@dataclass(frozen=True)
class CheckSpec:
    states: int = 500
    tolerance: float = 1e-10


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParameters = field(default_factory=ModelParameters)
    modes: int = 32
    seed: int = 0
    output: str | None = None
    simulate: SimulateSpec = SimulateSpec()
    spectrum: SpectrumSpec = SpectrumSpec()
    resolvent: ResolventSpec = ResolventSpec()
    gevrey: GevreySpec = GevreySpec()
    audit: AuditSpec = AuditSpec()
    sweep: SweepSpec = SweepSpec()
    check: CheckSpec = CheckSpec()

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Plain data in the file schema; ``config_from_dict`` inverts it."""
        out = {"modes": self.modes, "seed": self.seed}
        if self.output is not None:
            out["output"] = self.output
        out["model"] = self.model.to_dict()
        for name in ("simulate", "spectrum", "resolvent", "gevrey", "audit", "sweep", "check"):
            block = {}
            for f in dataclasses.fields(getattr(self, name)):
                value = getattr(getattr(self, name), f.name)
                if value is None:
                    continue
                key = "lambda" if f.name == "lam" else f.name
                if isinstance(value, LambdaSpec):
                    value = {k: v for k, v in dataclasses.asdict(value).items() if v is not None}
                elif isinstance(value, tuple):
                    value = [list(v) if isinstance(v, tuple) else v for v in value]
                elif isinstance(value, float) and math.isinf(value):
                    value = "inf"
                block[key] = value
            out[name] = block
        return out


# --------------------------------------------------------------------------
# validation helpers

def _number(value, key, *, integer=False, positive=False, nonneg=False, allow_inf=False):
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got a boolean", key=key)
    if allow_inf and isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    if integer:
        if not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}", key=key)
    elif not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key=key)
    value = int(value) if integer else float(value)
    if not integer and not allow_inf and not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite", key=key)
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive, got {value!r}", key=key)
    if nonneg and value < 0:
        raise ConfigError(f"{key}: must be nonnegative, got {value!r}", key=key)
    return value


def _table(value, key):
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a table, got {type(value).__name__}", key=key)
    return value


def _reject_unknown(table, allowed, prefix):
    for k in table:
        if k not in allowed:
            path = f"{prefix}.{k}" if prefix else k
            raise ConfigError(f"unknown key {path!r}", key=path)


def _lambda(value, key, base: LambdaSpec) -> LambdaSpec:
    t = _table(value, key)
    _reject_unknown(t, ("min", "max", "count", "log"), key)
    kw = {}
    for k in ("min", "max"):
        if k in t:
            kw[k] = _number(t[k], f"{key}.{k}", positive=True)
    if "count" in t:
        kw["count"] = _number(t["count"], f"{key}.count", integer=True, positive=True)
    if "log" in t:
        if not isinstance(t["log"], bool):
            raise ConfigError(f"{key}.log: expected true or false", key=f"{key}.log")
        kw["log"] = t["log"]
    return dataclasses.replace(base, **kw)


def _window(value, key):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{key}: expected [start, end]", key=key)
    lo, hi = (_number(v, key, nonneg=True) for v in value)
    if lo >= hi:
        raise ConfigError(f"{key}: start must be below end", key=key)
    return (lo, hi)


def _model(t) -> ModelParameters:
    names = {f.name for f in dataclasses.fields(ModelParameters)} - {"allow_zero_delta"}
    _reject_unknown(t, names, "model")
    kw = {}
    for k, v in t.items():
        if k == "variant":
            if not isinstance(v, str):
                raise ConfigError("model.variant: expected a string", key="model.variant")
            kw[k] = v
        elif k == "exponents":
            if not isinstance(v, (list, tuple)):
                raise ConfigError("model.exponents: expected a list of three numbers",
                                  key="model.exponents")
            kw[k] = tuple(_number(e, "model.exponents") for e in v)
        else:
            kw[k] = _number(v, f"model.{k}")
    try:
        return ModelParameters(**kw)
    except ParameterError as exc:
        raise ConfigError(f"model.{exc}", key=f"model.{exc.field}") from None


def _block(data, name, spec, handlers):
    if name not in data:
        return spec
    t = _table(data[name], name)
    _reject_unknown(t, handlers, name)
    kw = {}
    for k, v in t.items():
        attr, conv = handlers[k]
        kw[attr] = conv(v, f"{name}.{k}")
    return dataclasses.replace(spec, **kw)


def _str_choice(choices):
    def conv(v, key):
        if not isinstance(v, str) or v not in choices:
            raise ConfigError(f"{key}: expected one of {sorted(choices)}, got {v!r}", key=key)
        return v
    return conv


def _triples(v, key):
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(f"{key}: expected a non-empty list of triples", key=key)
    out = []
    for t in v:
        if not isinstance(t, (list, tuple)) or len(t) != 3:
            raise ConfigError(f"{key}: every entry must have three exponents", key=key)
        trip = tuple(_number(e, key) for e in t)
        if any(not 0.0 <= e <= 1.0 for e in trip):
            raise ConfigError(f"{key}: exponents must lie in [0, 1], got {trip}", key=key)
        out.append(trip)
    return tuple(out)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed document and apply defaults."""
    _table(data, "<root>")
    top = ("modes", "seed", "output", "model", "simulate", "spectrum", "resolvent",
           "gevrey", "audit", "sweep", "check")
    _reject_unknown(data, top, "")
    cfg = ExperimentConfig()
    kw = {}
    if "modes" in data:
        kw["modes"] = _number(data["modes"], "modes", integer=True, positive=True)
    if "seed" in data:
        kw["seed"] = _number(data["seed"], "seed", integer=True, nonneg=True)
    if "output" in data:
        if not isinstance(data["output"], str) or not data["output"]:
            raise ConfigError("output: expected a non-empty path prefix", key="output")
        kw["output"] = data["output"]
    if "model" in data:
        kw["model"] = _model(_table(data["model"], "model"))

    num = lambda **o: (lambda v, k: _number(v, k, **o))  # noqa: E731
    lam = lambda base: (lambda v, k: _lambda(v, k, base))  # noqa: E731

    kw["simulate"] = _block(data, "simulate", cfg.simulate, {
        "t_end": ("t_end", num(positive=True)),
        "samples": ("samples", num(integer=True, positive=True)),
        "window": ("window", _window),
        "initial": ("initial", _str_choice({"default", "random"})),
        "initial_decay": ("initial_decay", num(nonneg=True)),
        "fallback_dt": ("fallback_dt", num(positive=True)),
        "gap_tolerance": ("gap_tolerance", num(positive=True)),
    })
    kw["spectrum"] = _block(data, "spectrum", cfg.spectrum, {
        "abscissa_limit": ("abscissa_limit", num()),
    })
    kw["resolvent"] = _block(data, "resolvent", cfg.resolvent, {
        "lambda": ("lam", lam(cfg.resolvent.lam)),
        "probes": ("probes", num(integer=True, nonneg=True)),
    })
    kw["gevrey"] = _block(data, "gevrey", cfg.gevrey, {
        "lambda": ("lam", lam(cfg.gevrey.lam)),
        "tolerance": ("tolerance", num(nonneg=True)),
    })
    kw["audit"] = _block(data, "audit", cfg.audit, {
        "lambda": ("lam", lam(cfg.audit.lam)),
        "trials": ("trials", num(integer=True, positive=True)),
        "ceiling": ("ceiling", num(positive=True, allow_inf=True)),
    })
    kw["sweep"] = _block(data, "sweep", cfg.sweep, {
        "region": ("region", _str_choice({"unit", "half"})),
        "points": ("points", num(integer=True, positive=True)),
        "triples": ("triples", _triples),
        "lambda": ("lam", lam(cfg.sweep.lam)),
        "tolerance": ("tolerance", num(nonneg=True)),
    })
    kw["check"] = _block(data, "check", cfg.check, {
        "states": ("states", num(integer=True, positive=True)),
        "tolerance": ("tolerance", num(positive=True)),
    })
    sim = kw["simulate"]
    if sim.window is not None and sim.window[1] > sim.t_end:
        raise ConfigError("simulate.window: end exceeds t_end", key="simulate.window")
    return ExperimentConfig(**kw)


def parse_config(path) -> ExperimentConfig:
    """Read a TOML configuration, or the ``config`` echo of a run manifest."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    try:
        raw = path.read_bytes()
        if path.suffix.lower() == ".json":
            doc = json.loads(raw.decode("utf-8"))
            if isinstance(doc, dict) and "config" in doc and "outputs" in doc:
                doc = doc["config"]
        else:
            doc = tomllib.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: cannot parse: {exc}") from None
    return config_from_dict(doc)
