"""Randomized hyperparameter search scored by cross-validated concordance.

Configurations are drawn up front from SplitMix64, folds are fixed and
event-stratified, and every configuration is scored on the same folds.
Features are standardized inside each fold with that fold's training rows.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import standardize
from .metrics import concordance_index
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)

_FOLD_STREAM = 1
_DRAW_STREAM = 2


class SearchFailedError(RuntimeError):
    pass


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError("bounds must satisfy low < high")

    def sample(self, rng: SplitMix64) -> float:
        return self.low + (self.high - self.low) * rng.random()


@dataclass(frozen=True)
class LogUniform(Uniform):
    def __post_init__(self):
        if not 0 < self.low < self.high:
            raise ValueError("log-uniform bounds must satisfy 0 < low < high")

    def sample(self, rng: SplitMix64) -> float:
        lo, hi = math.log(self.low), math.log(self.high)
        return math.exp(lo + (hi - lo) * rng.random())


@dataclass(frozen=True)
class IntRange:
    """Integers low..high inclusive."""

    low: int
    high: int

    def __post_init__(self):
        if self.low > self.high:
            raise ValueError("bounds must satisfy low <= high")

    def sample(self, rng: SplitMix64) -> int:
        return self.low + rng.integers(self.high - self.low + 1)


@dataclass(frozen=True)
class Choice:
    values: list

    def __post_init__(self):
        if not self.values:
            raise ValueError("a categorical sampler needs at least one value")

    def sample(self, rng: SplitMix64):
        return self.values[rng.integers(len(self.values))]


@dataclass(frozen=True)
class SearchSpace:
    samplers: dict

    def sample(self, rng: SplitMix64) -> dict:
        # declaration order fixes the draw order
        return {name: s.sample(rng) for name, s in self.samplers.items()}


@dataclass(frozen=True)
class Trial:
    index: int
    configuration: dict
    fold_scores: tuple | None = None
    error: str | None = None

    @property
    def mean_score(self) -> float | None:
        if self.fold_scores is None:
            return None
        return float(np.mean(self.fold_scores))

    def to_json(self) -> dict:
        return {"index": self.index, "configuration": self.configuration,
                "mean_score": self.mean_score,
                "fold_scores": None if self.fold_scores is None else list(self.fold_scores),
                "error": self.error}


@dataclass(frozen=True)
class SearchResult:
    trials: tuple[Trial, ...]
    best_configuration: dict
    best_index: int
    search_seed: int
    skipped: bool = False
    folds: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {"search_seed": self.search_seed, "skipped": self.skipped,
                "best_index": self.best_index, "best_configuration": self.best_configuration,
                "trials": [t.to_json() for t in self.trials]}


def stratified_folds(event, n_folds: int, seed: int) -> np.ndarray:
    """Fold label per row: events, then censored rows, dealt round-robin after a shuffle."""
    event = np.asarray(event, dtype=bool)
    n = event.shape[0]
    if n_folds < 2 or n_folds > n:
        raise ValueError(f"need 2 <= folds <= {n}, got {n_folds}")
    perm = SplitMix64(derive_seed(seed, _FOLD_STREAM)).permutation(n)
    ordered = np.concatenate([perm[event[perm]], perm[~event[perm]]])
    labels = np.empty(n, dtype=np.int64)
    labels[ordered] = np.arange(n) % n_folds
    return labels


def draw_configurations(space: SearchSpace, budget: int, seed: int) -> list[dict]:
    rng = SplitMix64(derive_seed(seed, _DRAW_STREAM))
    return [space.sample(rng) for _ in range(budget)]


def _cv_scores_group(families, config: dict, train, labels, seed: int):
    """Fold scores per family; all families are scored on one fit per fold.

    Returns a list holding, per family, a tuple of scores or an error string.
    """
    fit = families[0].fit
    scores = [[] for _ in families]
    errors = [None] * len(families)
    for k in range(int(labels.max()) + 1):
        fit_part = train.subset(np.flatnonzero(labels != k))
        held_out = train.subset(np.flatnonzero(labels == k))
        fit_part, held_out, _ = standardize(fit_part, held_out)
        try:
            base = fit(fit_part, config, derive_seed(seed, k))
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            return [f"{type(exc).__name__}: {exc}"] * len(families)
        for i, fam in enumerate(families):
            if errors[i] is not None:
                continue
            try:
                model = fam.view(base) if fam.view is not None else base
                risk = model.predict_risk(held_out.X)
                c = concordance_index(held_out.time, held_out.event, risk).index
            except (ArithmeticError, ValueError, RuntimeError) as exc:
                errors[i] = f"{type(exc).__name__}: {exc}"
                continue
            if not np.isfinite(c):
                errors[i] = "non-finite fold score"
            scores[i].append(c)
    return [errors[i] if errors[i] is not None else tuple(scores[i])
            for i in range(len(families))]


def cv_scores(family, config: dict, train, labels, seed: int) -> tuple[float, ...]:
    """Fold concordances of one configuration; raises if any fold fails."""
    out = _cv_scores_group([family], config, train, labels, seed)[0]
    if isinstance(out, str):
        raise RuntimeError(out)
    return out


def best_trial(trials) -> Trial:
    """Highest mean score; the earliest draw wins ties."""
    scored = [t for t in trials if t.fold_scores is not None]
    if not scored:
        raise SearchFailedError("every configuration failed to fit")
    return max(scored, key=lambda t: (t.mean_score, -t.index))


def random_search(family, train, budget: int = 50, folds: int = 5, seed: int = 0,
                  space: SearchSpace | None = None) -> SearchResult:
    """Score ``budget`` random configurations of ``family`` by k-fold CV on ``train``.

    Families without a search space return their default configuration with
    ``skipped`` set.  Fitting only ever sees ``train``.
    """
    return random_search_group([family], train, budget, folds, seed, space)[family.tag]


def random_search_group(families, train, budget: int = 50, folds: int = 5, seed: int = 0,
                        space: SearchSpace | None = None) -> dict[str, SearchResult]:
    """Joint search for families that share one fitted model.

    Families in a group differ only in how they read predictions off the
    fit (``view``), so each configuration and fold is fitted once.  The
    result for each family equals that of a separate ``random_search``.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    families = list(families)
    shared = {f.shared for f in families}
    if len(families) > 1 and (len(shared) != 1 or None in shared):
        raise ValueError("grouped families must declare the same shared fit")
    if space is None:
        if not families[0].searchable:
            return {f.tag: SearchResult((), dict(f.default_config), -1, seed, skipped=True)
                    for f in families}
        space = families[0].space(train.n_features)
    labels = stratified_folds(train.event, folds, seed)
    configs = draw_configurations(space, budget, seed)
    per_family = [[] for _ in families]
    for i, config in enumerate(configs):
        outcomes = _cv_scores_group(families, config, train, labels, seed)
        for j, out in enumerate(outcomes):
            if isinstance(out, str):
                per_family[j].append(Trial(i, config, None, out))
            else:
                per_family[j].append(Trial(i, config, out))
    results = {}
    for fam, trials in zip(families, per_family):
        failed = sum(t.fold_scores is None for t in trials)
        if failed:
            log.warning("%s: %d of %d configurations failed", fam.tag, failed, budget)
        best = best_trial(trials)
        results[fam.tag] = SearchResult(tuple(trials), best.configuration, best.index, seed,
                                        folds=labels.tolist())
    return results
