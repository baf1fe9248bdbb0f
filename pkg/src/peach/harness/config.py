"""Experiment configuration, read from JSON with unknown keys rejected."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..scenario import DEFAULT_R_R, DEFAULT_R_T

ESTIMATORS = ("mmse", "mvu", "peach", "wpeach", "wpeach_approx")
ALPHA_RULES = ("extreme-eig", "trace")


class ConfigError(ValueError):
    pass


@dataclass
class DimsConfig:
    nt: int = 10
    nr: int = 100
    b: int = 10


@dataclass
class CorrelationConfig:
    r_t: float = DEFAULT_R_T
    r_r: float = DEFAULT_R_R
    # one (r_t, r_r) pair per interfering cell; K is the number of pairs
    interferers: list[list[float]] = field(
        default_factory=lambda: [[DEFAULT_R_T, DEFAULT_R_R], [DEFAULT_R_T, DEFAULT_R_R]]
    )


@dataclass
class BenchConfig:
    sizes: list[int] = field(default_factory=lambda: [64, 128, 256, 512])
    nt: int = 4
    order: int = 16
    repeats: int = 30


@dataclass
class ExperimentConfig:
    dims: DimsConfig = field(default_factory=DimsConfig)
    gamma_db: list[float] = field(default_factory=lambda: [5.0])
    beta: list[float] = field(default_factory=lambda: [0.0, 0.1])
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)
    estimators: list[str] = field(default_factory=lambda: ["mmse", "mvu", "peach", "wpeach"])
    orders: list[int] = field(default_factory=lambda: list(range(0, 11)))
    alpha_rule: str = "extreme-eig"
    noise_var: float = 1.0
    trials: int = 1000
    monte_carlo: bool = True
    seed: int = 0
    threads: int = 1
    window: int = 100
    probes: int | None = None
    adaptive_steps: int = 50
    adaptive_runs: int = 10
    bench: BenchConfig = field(default_factory=BenchConfig)
    out: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def n_interferers(self) -> int:
        return len(self.correlation.interferers)

    def validate(self) -> None:
        if not self.gamma_db or not self.beta or not self.orders or not self.estimators:
            raise ConfigError("gamma_db, beta, orders and estimators must be non-empty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.adaptive_steps < 1 or self.adaptive_runs < 1:
            raise ConfigError("adaptive_steps and adaptive_runs must be >= 1")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if any(L < 0 for L in self.orders):
            raise ConfigError("orders must be >= 0")
        if any(not 0.0 <= b < 1.0 for b in self.beta):
            raise ConfigError("beta values must lie in [0, 1)")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATORS}")
        if self.alpha_rule not in ALPHA_RULES:
            raise ConfigError(f"alpha_rule must be one of {ALPHA_RULES}")
        if self.noise_var <= 0:
            raise ConfigError("noise_var must be positive")
        for pair in self.correlation.interferers:
            if len(pair) != 2:
                raise ConfigError("each interferer needs an [r_t, r_r] pair")
        if len(self.bench.sizes) < 4:
            raise ConfigError("bench.sizes needs at least 4 values to fit an exponent")
        for m in self.bench.sizes:
            if m % self.bench.nt:
                raise ConfigError(f"bench size {m} is not a multiple of bench.nt={self.bench.nt}")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


_NESTED = {
    ExperimentConfig: {"dims": DimsConfig, "correlation": CorrelationConfig, "bench": BenchConfig},
}


def _build(cls, data: dict[str, Any], where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get(cls, {}).get(key)
        kwargs[key] = _build(sub, value, f"{where}{key}.") if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
