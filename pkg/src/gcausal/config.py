"""Experiment configuration: nested dataclasses loaded from / written to TOML.

Seed precedence: ``--seed`` flag, then the config file's ``seed``, then the
GCAUSAL_SEED environment variable, then 0.
"""

from __future__ import annotations

import os
import sys
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .engine import DiscoveryConfig
from .errors import ConfigError, GCausalError
from .forecaster import ForecasterConfig
from .stats import TEST_KINDS

METHODS = ("gcdmi", "mc-vgc", "mc-cdmi")
SWEEP_AXES = ("density", "nonlinearity", "groups")


@dataclass
class DataSection:
    source: str = "scm"
    panel: str = ""
    groups_file: str = ""
    missing_policy: str = "error"
    group_sizes: list = field(default_factory=lambda: [2, 2])
    density: float = 0.5
    nonlinearity: float = 0.5
    max_lag: int = 3
    length: int = 2000
    burn_in: int = 200
    noise_std: float = 1.0


@dataclass
class DiscoverySection:
    alpha: float = 0.05
    test_kind: str = "KS"
    shrinkage: float = 0.1
    stride: int = 0  # 0 means "equal to the forecast horizon"
    bonferroni: bool = False


@dataclass
class ForecasterSection:
    context_len: int = 5
    hidden_width: int = 32
    horizon: int = 2
    learning_rate: float = 3e-3
    epochs: int = 60
    batch_size: int = 64
    sigma_floor: float = 1e-3
    weight_decay: float = 3e-3


@dataclass
class BaselineSection:
    var_lag: int = 5


@dataclass
class RegimeSection:
    enabled: bool = False
    k: int = 2
    window_length: int = 100
    stride: int = 20
    smoothing_width: int = 5


@dataclass
class SweepSection:
    axis: str = "density"
    values: list = field(default_factory=lambda: [0.3, 0.6, 0.9])
    trials: int = 5
    methods: list = field(default_factory=lambda: ["gcdmi", "mc-vgc"])
    workers: int = 1


@dataclass
class KnockoffDiagSection:
    dims: list = field(default_factory=lambda: [5, 10, 20, 40])
    trials: int = 10
    rho: float = 0.5
    n_steps: int = 200
    shrinkage: float = 0.1


@dataclass
class TestBenchSection:
    n: int = 100
    repetitions: int = 200
    alpha: float = 0.05

    __test__ = False


@dataclass
class ExperimentConfig:
    seed: int = 0
    method: str = "gcdmi"
    output_dir: str = "out"
    data: DataSection = field(default_factory=DataSection)
    discovery: DiscoverySection = field(default_factory=DiscoverySection)
    forecaster: ForecasterSection = field(default_factory=ForecasterSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)
    regimes: RegimeSection = field(default_factory=RegimeSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    knockoff_diag: KnockoffDiagSection = field(default_factory=KnockoffDiagSection)
    test_bench: TestBenchSection = field(default_factory=TestBenchSection)

    def discovery_config(self) -> DiscoveryConfig:
        d, f = self.discovery, self.forecaster
        try:
            return DiscoveryConfig(
                alpha=d.alpha,
                test_kind=d.test_kind,
                forecaster=ForecasterConfig(**asdict(f)),
                shrinkage=d.shrinkage,
                stride=d.stride or None,
                bonferroni=d.bonferroni,
                seed=self.seed,
            )
        except GCausalError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self, include_output: bool = True) -> dict:
        out = asdict(self)
        if not include_output:
            out.pop("output_dir")
        return out

    def validate(self, needs_data: bool = False) -> "ExperimentConfig":
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        d = self.data
        if d.source not in ("scm", "csv"):
            raise ConfigError(f"data.source must be 'scm' or 'csv', got {d.source!r}")
        if d.source == "csv" and needs_data:
            for key in ("panel", "groups_file"):
                path = getattr(d, key)
                if not path:
                    raise ConfigError(f"data.{key} is required when data.source = 'csv'")
                if not Path(path).is_file():
                    raise ConfigError(f"data.{key} does not exist: {path}")
        if d.source == "scm":
            if not d.group_sizes or any(int(s) < 1 for s in d.group_sizes):
                raise ConfigError(f"data.group_sizes must be positive, got {d.group_sizes}")
            if not (0 <= d.density <= 1 and 0 <= d.nonlinearity <= 1):
                raise ConfigError("data.density and data.nonlinearity must lie in [0, 1]")
        if self.discovery.test_kind.upper() not in TEST_KINDS:
            raise ConfigError(f"discovery.test_kind must be one of {TEST_KINDS}")
        s = self.sweep
        if s.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {s.axis!r}")
        for m in s.methods:
            if m not in METHODS:
                raise ConfigError(f"sweep.methods entry {m!r} is not one of {METHODS}")
        for v in s.values:
            if s.axis == "groups" and (int(v) != v or v < 1):
                raise ConfigError(f"group-count sweep values must be positive integers, got {v}")
            if s.axis != "groups" and not 0 <= v <= 1:
                raise ConfigError(f"{s.axis} sweep values must lie in [0, 1], got {v}")
        if s.trials < 1 or s.workers < 1:
            raise ConfigError("sweep.trials and sweep.workers must be >= 1")
        self.discovery_config()
        return self


def _build(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where or 'top level'}]: {', '.join(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, name)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(raw: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, raw, "")


def load_config(path) -> tuple[ExperimentConfig, dict]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw), raw


def resolve_seed(cli_seed, raw: dict | None) -> int:
    if cli_seed is not None:
        seed = cli_seed
    elif raw and "seed" in raw:
        seed = raw["seed"]
    else:
        seed = os.environ.get("GCAUSAL_SEED") or 0
    try:
        seed = int(seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"seed must be an integer, got {seed!r}") from exc
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    return seed


def dump_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "wb") as fh:
        tomli_w.dump(cfg.to_dict(), fh)


def with_overrides(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply dotted-key overrides such as {"data.density": 0.3}; None values are skipped."""
    for key, value in overrides.items():
        if value is None:
            continue
        parts = key.split(".")
        if len(parts) == 1:
            cfg = replace(cfg, **{parts[0]: value})
        else:
            section = getattr(cfg, parts[0])
            cfg = replace(cfg, **{parts[0]: replace(section, **{parts[1]: value})})
    return cfg
