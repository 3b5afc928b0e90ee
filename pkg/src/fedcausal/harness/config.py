"""Experiment configuration: a single JSON or TOML file."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from ..fedci import MODES, SKETCHED

PC_FAMILY = ("pc", "fedpc", "pc-voting", "pc-cit-voting")
FCI_FAMILY = ("fci", "fedfci", "fci-voting", "fci-cit-voting")
ALGORITHM_IDS = PC_FAMILY + FCI_FAMILY

BUILTIN_TRUTHS = ("sachs",)
FULL_GRID = {"d": [10, 20, 50, 100], "k": [2, 4, 8, 16, 32, 64], "n": 10_000, "reps": 10}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


@dataclass
class HeterogeneityConfig:
    """Sharp client routing keyed on ``parents`` (``None``: the two highest-degree variables)."""

    parents: list | None = None
    sharpness: float = 8.0


@dataclass
class ExperimentConfig:
    d: list = field(default_factory=lambda: [10, 20])
    edge_prob: float | None = None
    cardinality: int = 2
    dirichlet_alpha: float = 1.0
    latents: int = 0
    n: int = 5000
    k: list = field(default_factory=lambda: [2, 4, 8])
    algorithms: list = field(default_factory=lambda: ["pc", "fedpc"])
    alpha: float = 0.05
    l: int = 50
    mode: str = SKETCHED
    seed: int = 0
    reps: int = 5
    dropout: float = 0.0
    heterogeneity: HeterogeneityConfig | None = None
    max_cond: int | str | None = "auto"
    dataset: str | None = None
    truth: str | None = None
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.d, int):
            self.d = [self.d]
        if isinstance(self.k, int):
            self.k = [self.k]
        if isinstance(self.heterogeneity, dict):
            self.heterogeneity = HeterogeneityConfig(**self.heterogeneity)
        self.validate()

    @property
    def seeds(self) -> list[int]:
        return list(range(self.seed, self.seed + self.reps))

    def validate(self) -> None:
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        unknown = [a for a in self.algorithms if a not in ALGORITHM_IDS]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}; known: {list(ALGORITHM_IDS)}")
        if not self.algorithms:
            raise ConfigError("no algorithms configured")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.l < 2:
            raise ConfigError("encoding size l must be at least 2")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout fraction must lie in [0, 1)")
        if any(k < 1 for k in self.k) or not self.k:
            raise ConfigError("client counts must be positive")
        if self.dataset is None and (not self.d or any(d < 2 for d in self.d)):
            raise ConfigError("synthetic graphs need d >= 2")
        if self.cardinality < 2:
            raise ConfigError("cardinality must be at least 2")
        if self.latents < 0:
            raise ConfigError("latents must be non-negative")
        if self.latents and any(a in PC_FAMILY for a in self.algorithms):
            raise ConfigError("latent variables need FCI-family algorithms")
        if (self.dataset is None) != (self.truth is None):
            raise ConfigError("dataset and truth must be given together")
        if self.dataset is not None and self.heterogeneity is not None:
            raise ConfigError("heterogeneous routing needs a generative model; use a synthetic grid")
        if self.max_cond not in ("auto", None) and (not isinstance(self.max_cond, int) or self.max_cond < 0):
            raise ConfigError("max_cond must be 'auto', null or a non-negative integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)

    def with_full_grid(self) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), **FULL_GRID})

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    """Read a ``.json`` or ``.toml`` config; relative data paths resolve against the file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomllib.loads(text) if path.suffix == ".toml" else json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    for key in ("dataset", "truth"):
        if raw.get(key) and raw[key] not in BUILTIN_TRUTHS and not Path(raw[key]).is_absolute():
            raw[key] = str(path.parent / raw[key])
    return ExperimentConfig.from_dict(raw)
