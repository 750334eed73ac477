"""Gradient boosting of regression trees under the Cox partial likelihood.

The ensemble is additive on the log-risk scale: F(x) = sum_t lr * tree_t(x)
enters a proportional-hazards model exp(F(x)) h0(t), and each stage fits a
least-squares tree to the negative gradient of the Efron negative partial
log-likelihood with respect to F at the training rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _tree
from .base import (MODEL_FORMAT_VERSION, NumericalError, check_features, require_events)
from .linear_models.cox import EfronTerms
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray   # per node; meaningful at leaves

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
        return self.value[_tree.apply(self.feature, self.threshold, self.left, self.right, X)]

    def to_json(self) -> dict:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=float),
                   np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
                   np.array(d["value"], dtype=float))


def fit_regression_tree(X, y, samples, max_depth: int, min_leaf_size: int,
                        seed: int = 0) -> RegressionTree:
    """Least-squares tree on rows ``samples``; leaves hold the mean target."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.int64)
    m = X.shape[1]
    dummy_t = np.zeros(X.shape[0], dtype=np.int64)
    dummy_e = np.zeros(X.shape[0], dtype=bool)
    state = np.array([seed], dtype=np.uint64)
    feature, threshold, left, right, start, end, idx = _tree.grow(
        X, dummy_t, dummy_e, y, samples, _tree.VARIANCE, m, min_leaf_size, max_depth, state)
    value = np.zeros(feature.shape[0])
    for node in np.flatnonzero(feature < 0):
        value[node] = y[idx[start[node]:end[node]]].mean()
    return RegressionTree(feature, threshold, left, right, value)


@dataclass(frozen=True, eq=False)
class BoostedCoxModel:
    stages: tuple[RegressionTree, ...]
    learning_rate: float
    n_features: int
    train_loss: tuple[float, ...] = ()   # before any stage, then after each
    baseline: float = 0.0

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def predict_risk(self, X, n_stages: int | None = None) -> np.ndarray:
        """Log-risk F(x), optionally from the first ``n_stages`` stages only."""
        X = check_features(X, self.n_features)
        k = self.n_stages if n_stages is None else int(n_stages)
        if not 0 <= k <= self.n_stages:
            raise ValueError(f"n_stages must lie in [0, {self.n_stages}]")
        out = np.full(X.shape[0], self.baseline)
        for tree in self.stages[:k]:
            out += self.learning_rate * tree.predict(X)
        return out

    def to_json(self) -> dict:
        return {"format_version": MODEL_FORMAT_VERSION, "model": "gbcox",
                "learning_rate": self.learning_rate, "n_features": self.n_features,
                "baseline": self.baseline, "train_loss": list(self.train_loss),
                "stages": [t.to_json() for t in self.stages]}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(RegressionTree.from_json(t) for t in d["stages"]), d["learning_rate"],
                   d["n_features"], tuple(d["train_loss"]), d["baseline"])


def cox_pseudo_residuals(terms: EfronTerms, F) -> tuple[float, np.ndarray]:
    """Negative partial log-likelihood at F and its negative gradient in F."""
    ll, grad_eta = terms.evaluate(F)
    return -ll, grad_eta


def gbcox_fit(train, n_stages: int = 100, learning_rate: float = 0.1, max_depth: int = 3,
              min_leaf_size: int = 10, subsample: float = 1.0, seed: int = 0) -> BoostedCoxModel:
    if n_stages < 0:
        raise ValueError("n_stages must be non-negative")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must lie in (0, 1]")
    if not 0.0 < subsample <= 1.0:
        raise ValueError("subsample must lie in (0, 1]")
    if max_depth < 1 or min_leaf_size < 1:
        raise ValueError("max_depth and min_leaf_size must be positive")
    require_events(train.event, 2, "boosted Cox model")
    X = np.ascontiguousarray(train.X, dtype=np.float64)
    n = X.shape[0]
    terms = EfronTerms(train.time, train.event)
    F = np.zeros(n)
    loss, resid = cox_pseudo_residuals(terms, F)
    losses = [loss]
    n_sub = max(1, int(round(subsample * n)))
    stages = []
    for stage in range(n_stages):
        stage_seed = derive_seed(seed, stage)
        if n_sub < n:
            rows = np.sort(SplitMix64(stage_seed).permutation(n)[:n_sub])
        else:
            rows = np.arange(n)
        tree = fit_regression_tree(X, resid, rows, max_depth, min_leaf_size, stage_seed)
        F = F + learning_rate * tree.predict(X)
        loss, resid = cox_pseudo_residuals(terms, F)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at stage {stage}")
        stages.append(tree)
        losses.append(loss)
    return BoostedCoxModel(tuple(stages), float(learning_rate), X.shape[1], tuple(losses))
