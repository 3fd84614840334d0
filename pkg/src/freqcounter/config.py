"""Experiment configuration: defaults, YAML loading and validation.

A configuration file is YAML with a ``schema_version`` key and optional
sections that override the defaults of the chosen experiment::

    schema_version: 1
    experiment: resampling
    seed: 7
    duration: 10.0
    noise: {S_th: 5.0e-8, K: 0.03, oversample: 16}
    counter: {lpf_cutoff: 200.0, R: 8192}
    pll: {kp: 2.92, ki: 13.34}
    analysis: {tau_min: 1.0e-3}
    budget: {max_samples: 17179869184}

Unknown keys are errors. Every problem is reported with its dotted
location, and all problems in a file are collected before raising.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .counter import DEFAULT_F_CLK, DEFAULT_INTERP_RES
from .pll import PllConfig
from .signal_model import NoiseConfig

SCHEMA_VERSION = 1
EXPERIMENTS = ("filter-placement", "gate-sweep", "mavg-emulation", "resampling", "pll-compare")


class ConfigError(ValueError):
    """Invalid configuration. ``errors`` lists ``{"location", "message"}`` dicts."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{e['location']}: {e['message']}" for e in self.errors))


@dataclass(frozen=True)
class CounterSettings:
    f_clk: float = DEFAULT_F_CLK
    interp_res: float = DEFAULT_INTERP_RES
    R: int = 8192
    N: int = 2
    lpf_cutoff: float = 200.0
    k_values: tuple = (1, 11, 121)
    mavg_window: int = 121
    T_int: float = 100e-6

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ValueError("k_values must be a non-empty list of positive integers")


@dataclass(frozen=True)
class AnalysisConfig:
    """Averaging times: a 1-2-5 series from ``tau_min`` to ``tau_max``.

    ``tau_max=None`` means a tenth of the record, which keeps at least ten
    blocks at every tau.
    """

    tau_min: float = 1e-3
    tau_max: float | None = None
    settle_time: float | None = None

    def __post_init__(self):
        if not self.tau_min > 0:
            raise ValueError("tau_min must be positive")
        if self.tau_max is not None and not self.tau_max >= self.tau_min:
            raise ValueError("tau_max must be at least tau_min")


@dataclass(frozen=True)
class BudgetConfig:
    max_samples: int = 1 << 34

    def __post_init__(self):
        if int(self.max_samples) < 1:
            raise ValueError("max_samples must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 0
    duration: float = 10.0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    counter: CounterSettings = field(default_factory=CounterSettings)
    pll: PllConfig = field(default_factory=PllConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    budget: BudgetConfig = field(default_factory=BudgetConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not (isinstance(self.duration, (int, float)) and math.isfinite(self.duration) and self.duration > 0):
            raise ValueError("duration must be a positive number of seconds")

    @property
    def tau_max(self):
        return self.analysis.tau_max if self.analysis.tau_max is not None else self.duration / 10

    def to_dict(self):
        d = asdict(self)
        d["counter"]["k_values"] = list(self.counter.k_values)
        return {"schema_version": SCHEMA_VERSION, **d}


def default_config(experiment, seed=0, duration=10.0) -> ExperimentConfig:
    """Defaults per experiment. The filter-placement run uses a
    detection-dominated source with a 20 kHz loop band-pass so that the
    conversion nonlinearity is visible; the others use the standard source.
    """
    noise = NoiseConfig()
    if experiment == "filter-placement":
        noise = NoiseConfig(S_th=2e-13, K=1000.0, bpf_bandwidth=20e3)
    return ExperimentConfig(experiment=experiment, seed=seed, duration=duration, noise=noise)


_SECTIONS = {
    "noise": NoiseConfig,
    "counter": CounterSettings,
    "pll": PllConfig,
    "analysis": AnalysisConfig,
    "budget": BudgetConfig,
}
_TOP = {"schema_version", "experiment", "seed", "duration", *_SECTIONS}
_INT_FIELDS = {"oversample", "R", "N", "mavg_window", "max_samples"}


def _check_scalar(name, value, loc, errors):
    if name == "k_values":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            errors.append({"location": loc, "message": "expected a list of integers"})
            return False
        return True
    if name in _INT_FIELDS:
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append({"location": loc, "message": f"expected an integer, got {value!r}"})
            return False
        return True
    if value is None and name in ("tau_max", "settle_time"):
        return True
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append({"location": loc, "message": f"expected a number, got {value!r}"})
        return False
    return True


def config_from_dict(data, source="<config>", experiment=None) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed YAML, reporting every problem."""
    errors = []
    if not isinstance(data, dict):
        raise ConfigError([{"location": source, "message": "top level must be a mapping"}])
    for key in data:
        if key not in _TOP:
            errors.append({"location": f"{source}:{key}", "message": "unknown key"})
    version = data.get("schema_version")
    if version is None:
        errors.append({"location": f"{source}:schema_version", "message": "missing (expected 1)"})
    elif version != SCHEMA_VERSION:
        errors.append({"location": f"{source}:schema_version", "message": f"unsupported version {version!r}"})
    name = data.get("experiment", experiment)
    if experiment is not None and name != experiment:
        errors.append(
            {"location": f"{source}:experiment", "message": f"file is for {name!r}, but {experiment!r} was requested"}
        )
    if name not in EXPERIMENTS:
        errors.append({"location": f"{source}:experiment", "message": f"expected one of {', '.join(EXPERIMENTS)}"})
        raise ConfigError(errors)
    base = default_config(name)
    top = {}
    for key in ("seed", "duration"):
        if key in data:
            val = data[key]
            ok = isinstance(val, int) if key == "seed" else isinstance(val, (int, float))
            if isinstance(val, bool) or not ok:
                errors.append({"location": f"{source}:{key}", "message": f"invalid value {val!r}"})
            else:
                top[key] = val
    sections = {}
    for sec, cls in _SECTIONS.items():
        if sec not in data:
            continue
        body = data[sec]
        if not isinstance(body, dict):
            errors.append({"location": f"{source}:{sec}", "message": "expected a mapping"})
            continue
        allowed = {f.name for f in fields(cls)}
        good = {}
        for key, val in body.items():
            loc = f"{source}:{sec}.{key}"
            if key not in allowed:
                errors.append({"location": loc, "message": "unknown key"})
            elif _check_scalar(key, val, loc, errors):
                good[key] = val
        try:
            sections[sec] = replace(getattr(base, sec), **good)
        except (ValueError, TypeError) as exc:
            errors.append({"location": f"{source}:{sec}", "message": str(exc)})
    if errors:
        raise ConfigError(errors)
    try:
        return replace(base, **top, **sections)
    except (ValueError, TypeError) as exc:
        raise ConfigError([{"location": source, "message": str(exc)}]) from exc


def load_config(path, experiment=None) -> ExperimentConfig:
    """Read a YAML configuration file. I/O and syntax errors become ConfigError."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([{"location": str(path), "message": exc.strerror or str(exc)}]) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError([{"location": loc, "message": f"YAML syntax error: {getattr(exc, 'problem', exc)}"}]) from exc
    if data is None:
        data = {}
    return config_from_dict(data, source=str(path), experiment=experiment)
