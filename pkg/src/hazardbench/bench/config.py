"""Benchmark configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from ..families import FAMILIES

DATASETS = ("pbc", "gbcsg2")
SOURCES = ("default", "search")
BENCH_MODELS = ("cox", "aalen", "weibull", "rsf", "rsf_ann", "gbcox", "deepsurv")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    datasets: tuple[str, ...] = DATASETS
    models: tuple[str, ...] = BENCH_MODELS
    sources: tuple[str, ...] = SOURCES
    seeds: tuple[int, ...] = tuple(range(25))
    test_fraction: float = 0.25
    search_budget: int = 50
    folds: int = 5
    drop_id_feature: bool = False
    save_models: bool = False
    # models run with default hyperparameters only (diagnostics)
    default_only: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for name, values, allowed in (("dataset", self.datasets, DATASETS),
                                      ("source", self.sources, SOURCES),
                                      ("model", self.models + self.default_only, FAMILIES)):
            if not values and name != "model":
                raise ConfigError(f"at least one {name} is required")
            for v in values:
                if v not in allowed:
                    raise ConfigError(f"unknown {name} {v!r}; choose from {', '.join(allowed)}")
            if len(set(values)) != len(values):
                raise ConfigError(f"duplicate {name} in {list(values)}")
        if not self.models and not self.default_only:
            raise ConfigError("at least one model is required")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ConfigError("seeds must be distinct non-negative integers")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test fraction must lie in (0, 1)")
        if self.search_budget < 1 or self.folds < 2:
            raise ConfigError("search budget must be >= 1 and folds >= 2")

    def groups(self):
        """(dataset, model, source) triples in report order."""
        for d in self.datasets:
            for m in self.models:
                for s in self.sources:
                    yield d, m, s
            for m in self.default_only:
                yield d, m, "default"

    def to_json(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        for k in ("datasets", "models", "sources", "seeds", "default_only"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    def config_hash(self) -> str:
        # save_models only changes side outputs, not results
        d = self.to_json()
        d.pop("save_models")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def replica_config(**overrides) -> BenchConfig:
    """25 seeds, both datasets, every model under both sources, plus the linear-network check."""
    return BenchConfig(default_only=("deepsurv_linear",), **overrides)


def parse_seeds(text: str) -> tuple[int, ...]:
    """``"0..24"`` (inclusive), ``"3"`` or ``"1,4,9"``; ranges and lists may mix."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if ".." in part:
                lo, hi = (int(p) for p in part.split(".."))
                if hi < lo:
                    raise ConfigError(f"empty seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    return tuple(seeds)
