"""Run configuration: one YAML file drives every subcommand.

Unknown keys are rejected so typos surface as usage errors instead of
silently falling back to defaults.  An empty file reproduces the default
benchmark.  See ``docs/formats.md`` for the grammar.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .dataio import SynthConfig
from .errors import ConfigError, HypoxiaError
from .models import ARCHITECTURES, ModelConfig
from .preprocess import PrepConfig, normalize_periods
from .training import TrainConfig

OUTPUT_ENV = "HYPOXBENCH_OUTPUT_DIR"
DEFAULT_TEST_PERIODS = (("2020-07-01", "2020-08-31"),)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    output_dir: str = "runs/bench"
    synthetic: Optional[SynthConfig] = field(default_factory=SynthConfig)
    data_path: Optional[str] = None
    test_periods: tuple = DEFAULT_TEST_PERIODS
    prep: PrepConfig = field(default_factory=PrepConfig)
    models: tuple[str, ...] = ARCHITECTURES
    overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.models:
            raise ConfigError("at least one model must be enabled")
        bad = [m for m in self.models if m not in ARCHITECTURES]
        if bad:
            raise ConfigError(f"unknown model(s) {bad}; expected a subset of {list(ARCHITECTURES)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError("models list contains duplicates")
        if (self.synthetic is None) == (self.data_path is None):
            raise ConfigError("data: give exactly one of 'synthetic' or 'path'")
        stray = set(self.overrides) - set(ARCHITECTURES)
        if stray:
            raise ConfigError(f"overrides for unknown model(s) {sorted(stray)}")
        try:
            normalize_periods(self.test_periods)
        except (HypoxiaError, ValueError, TypeError) as exc:
            raise ConfigError(f"split.test_periods: {exc}") from None
        for m in self.models:
            try:
                self.model_config(m)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"models.overrides.{m}: {exc}") from None

    def model_config(self, arch: str) -> ModelConfig:
        return ModelConfig.default(arch, **dict(self.overrides.get(arch, {})))

    def periods(self):
        return normalize_periods(self.test_periods)

    def with_seed(self, seed: int) -> "RunConfig":
        synth = self.synthetic and dataclasses.replace(self.synthetic, rng_seed=seed)
        return dataclasses.replace(self, seed=seed, synthetic=synth,
                                   train=dataclasses.replace(self.train, seed=seed))

    def with_output(self, output_dir) -> "RunConfig":
        return dataclasses.replace(self, output_dir=str(output_dir))

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = ({"path": self.data_path} if self.data_path else
                                {"synthetic": _plain(dataclasses.asdict(self.synthetic))})
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "data": data,
            "split": {"test_periods": [[a.isoformat(), b.isoformat()] for a, b in self.periods()]},
            "preprocess": dataclasses.asdict(self.prep),
            "models": {"enabled": list(self.models),
                       "overrides": {k: _plain(dict(v)) for k, v in sorted(self.overrides.items())}},
            "train": dataclasses.asdict(self.train),
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form, excluding the output location."""
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def _section(d: Mapping, name: str, allowed) -> dict:
    sub = d.get(name) or {}
    if not isinstance(sub, Mapping):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = set(sub) - set(allowed)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {sorted(unknown)}")
    return dict(sub)


def _fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build(cls, kw: dict, where: str):
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def from_dict(d: Optional[Mapping[str, Any]]) -> RunConfig:
    d = dict(d or {})
    unknown = set(d) - {"seed", "output_dir", "data", "split", "preprocess", "models", "train"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    seed = d.get("seed", 7)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")

    data = _section(d, "data", {"synthetic", "path"})
    if "path" in data and "synthetic" in data:
        raise ConfigError("data: give exactly one of 'synthetic' or 'path'")
    synthetic, path = None, data.get("path")
    if path is None:
        kw = _section(data, "synthetic", _fields(SynthConfig))
        kw.setdefault("rng_seed", seed)
        synthetic = _build(SynthConfig, kw, "data.synthetic")

    split = _section(d, "split", {"test_periods"})
    periods = split.get("test_periods", DEFAULT_TEST_PERIODS)
    if not isinstance(periods, (list, tuple)) or not periods:
        raise ConfigError("split.test_periods must be a non-empty list of [start, end] pairs")
    periods = tuple(tuple(_date_text(v) for v in p) for p in periods)

    prep = _build(PrepConfig, _section(d, "preprocess", _fields(PrepConfig)), "preprocess")
    models = _section(d, "models", {"enabled", "overrides"})
    enabled = tuple(models.get("enabled", ARCHITECTURES))
    overrides = models.get("overrides") or {}
    if not isinstance(overrides, Mapping):
        raise ConfigError("models.overrides must be a mapping of architecture -> options")

    tkw = _section(d, "train", _fields(TrainConfig))
    tkw.setdefault("seed", seed)
    train = _build(TrainConfig, tkw, "train")
    return RunConfig(seed=seed, output_dir=str(d.get("output_dir", "runs/bench")), synthetic=synthetic,
                     data_path=path, test_periods=periods, prep=prep, models=enabled,
                     overrides={k: dict(v or {}) for k, v in overrides.items()}, train=train)


def _date_text(v) -> str:
    if isinstance(v, dt.date):
        return v.isoformat()
    if not isinstance(v, str):
        raise ConfigError(f"split.test_periods: expected ISO dates, got {v!r}")
    return v


def load(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        d = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from None
    if d is not None and not isinstance(d, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = from_dict(d)
    if cfg.data_path and not Path(cfg.data_path).is_absolute():
        cfg = dataclasses.replace(cfg, data_path=str((path.parent / cfg.data_path).resolve()))
    return cfg


def bundled_config_path() -> Path:
    """The shipped 200-cell synthetic benchmark config."""
    return Path(str(resources.files("hypoxbench") / "data" / "bench.yaml"))


def resolve_output(cfg: RunConfig, cli_output=None) -> Path:
    """Command line beats the environment, which beats the config file."""
    out = cli_output or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return Path(out)


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
