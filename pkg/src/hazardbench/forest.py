"""Random survival forests grown with log-rank splitting.

Two prediction variants share the same trees:

``ENSEMBLE_CHF``
    Each leaf keeps a Nelson-Aalen cumulative hazard; the risk of x is the
    ensemble mortality, the tree-average of its leaf hazards summed over the
    distinct training event times.
``ADAPTIVE_NN_KM``
    Each leaf keeps a Kaplan-Meier curve; the curves of the leaves x falls
    into are averaged pointwise and the risk is minus the area under the
    averaged curve up to the last training event time.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _tree
from .base import MODEL_FORMAT_VERSION, UnfittableError, check_features
from .metrics import StepFunction, kaplan_meier, nelson_aalen
from .rng import derive_seed

log = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    ENSEMBLE_CHF = "ENSEMBLE_CHF"
    ADAPTIVE_NN_KM = "ADAPTIVE_NN_KM"


def logrank_statistic(group_a, group_b) -> float:
    """Absolute standardized two-sample log-rank statistic.

    Each group is a ``(times, events)`` pair.  Returns 0 when the
    hypergeometric variance is zero (for instance when there are no events).
    """
    t_a, e_a = (np.asarray(v) for v in group_a)
    t_b, e_b = (np.asarray(v) for v in group_b)
    if t_a.size == 0 or t_b.size == 0:
        raise ValueError("both groups must be non-empty")
    times = np.concatenate([t_a, t_b]).astype(np.float64)
    events = np.concatenate([e_a, e_b]).astype(bool)
    uniq, inv = np.unique(times, return_inverse=True)
    k = uniq.shape[0]
    cnt = np.bincount(inv, minlength=k).astype(np.int64)
    dth = np.bincount(inv, weights=events, minlength=k).astype(np.int64)
    inv_a = inv[:t_a.size]
    cnt_a = np.bincount(inv_a, minlength=k).astype(np.int64)
    dth_a = np.bincount(inv_a, weights=events[:t_a.size], minlength=k).astype(np.int64)
    return float(_tree.logrank_from_counts(cnt, dth, cnt_a, dth_a, times.size, t_a.size))


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    mtry: int | None = None          # None: ceil(sqrt(m))
    min_leaf_size: int = 10
    max_depth: int | None = None     # None: unlimited

    def resolved_mtry(self, m: int) -> int:
        mtry = math.ceil(math.sqrt(m)) if self.mtry is None else int(self.mtry)
        if not 1 <= mtry <= m:
            raise ValueError(f"mtry must lie in [1, {m}], got {mtry}")
        return mtry


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Distinct training times and their event flags."""

    times: np.ndarray
    is_event: np.ndarray

    @classmethod
    def from_data(cls, time, event):
        times, inv = np.unique(time, return_inverse=True)
        is_event = np.zeros(times.shape[0], dtype=bool)
        is_event[inv[event]] = True
        return cls(times, is_event)

    @property
    def horizon(self) -> int:
        """Index of the last event time."""
        return int(np.flatnonzero(self.is_event)[-1])


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_start: np.ndarray
    node_end: np.ndarray
    sample_order: np.ndarray   # training row indices, grouped by leaf
    mortality: np.ndarray      # per node, 0 for internal nodes
    km_area: np.ndarray
    rng_seed: int
    # training outcomes, kept for the leaf curves
    time: np.ndarray = field(repr=False)
    event: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def leaf_samples(self, node: int) -> np.ndarray:
        return self.sample_order[self.node_start[node]:self.node_end[node]]

    def apply(self, X) -> np.ndarray:
        return _tree.apply(self.feature, self.threshold, self.left, self.right,
                           np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64))

    def leaf_km(self, node: int) -> StepFunction:
        s = self.leaf_samples(node)
        return kaplan_meier(self.time[s], self.event[s])

    def leaf_cumhaz(self, node: int) -> StepFunction:
        s = self.leaf_samples(node)
        return nelson_aalen(self.time[s], self.event[s])

    def to_json(self) -> dict:
        leaves = {}
        for node in self.leaves.tolist():
            leaves[str(node)] = {"samples": self.leaf_samples(node).tolist(),
                                 "km": self.leaf_km(node).to_json(),
                                 "cumhaz": self.leaf_cumhaz(node).to_json(),
                                 "mortality": float(self.mortality[node]),
                                 "km_area": float(self.km_area[node])}
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "rng_seed": self.rng_seed, "leaves": leaves}


def _time_index(grid: TimeGrid, time) -> np.ndarray:
    return np.searchsorted(grid.times, time).astype(np.int64)


def grow_tree(X, time, event, samples, params: ForestParams, seed: int,
              grid: TimeGrid | None = None) -> SurvivalTree:
    """Grow one log-rank survival tree on the rows ``samples``.

    Nodes with fewer than ``2 * min_leaf_size`` rows, fewer than two
    events, or at ``max_depth`` become leaves, so a sample that is too
    small to split yields a single-leaf tree.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    samples = np.asarray(samples, dtype=np.int64)
    if samples.size == 0:
        raise UnfittableError("cannot grow a tree on an empty sample")
    if not event[samples].any():
        raise UnfittableError("tree sample contains no events")
    if params.min_leaf_size < 1:
        raise ValueError("min_leaf_size must be at least 1")
    if grid is None:
        grid = TimeGrid.from_data(time, event)
    tidx = _time_index(grid, time)
    mtry = params.resolved_mtry(X.shape[1])
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    state = np.array([seed], dtype=np.uint64)
    feature, threshold, left, right, start, end, order = _tree.grow(
        X, tidx, event, np.empty(0), samples, _tree.LOGRANK, mtry, int(params.min_leaf_size),
        max_depth, state)
    mortality, km_area = _tree.leaf_summaries(feature, start, end, order, tidx, event,
                                              grid.times, grid.is_event, grid.horizon)
    return SurvivalTree(feature, threshold, left, right, start, end, order, mortality, km_area,
                        int(seed), time, event)


@dataclass(frozen=True, eq=False)
class SurvivalForest:
    trees: tuple[SurvivalTree, ...]
    params: ForestParams
    variant: Variant
    master_seed: int
    grid: TimeGrid
    n_features: int
    n_failed_trees: int = 0

    def _leaf_values(self, X) -> np.ndarray:
        X = check_features(X, self.n_features)
        X = np.ascontiguousarray(X)
        vals = np.empty((len(self.trees), X.shape[0]))
        for k, tree in enumerate(self.trees):
            leaf = tree.apply(X)
            if self.variant is Variant.ENSEMBLE_CHF:
                vals[k] = tree.mortality[leaf]
            else:
                vals[k] = -tree.km_area[leaf]
        return vals

    def predict_risk(self, X) -> np.ndarray:
        vals = self._leaf_values(X)
        # sorting first makes the average independent of tree order
        return np.sort(vals, axis=0).sum(axis=0) / vals.shape[0]

    def predict_survival(self, x) -> StepFunction:
        """Tree-averaged leaf Kaplan-Meier curve on the training time grid."""
        x = check_features(x, self.n_features)
        curves = np.empty((len(self.trees), self.grid.times.shape[0]))
        for k, tree in enumerate(self.trees):
            leaf = int(tree.apply(x)[0])
            curves[k] = tree.leaf_km(leaf)(self.grid.times)
        return StepFunction(self.grid.times, np.sort(curves, axis=0).sum(axis=0) / len(self.trees), 1.0)

    def predict_cumhaz(self, x) -> StepFunction:
        x = check_features(x, self.n_features)
        curves = np.empty((len(self.trees), self.grid.times.shape[0]))
        for k, tree in enumerate(self.trees):
            leaf = int(tree.apply(x)[0])
            curves[k] = tree.leaf_cumhaz(leaf)(self.grid.times)
        return StepFunction(self.grid.times, np.sort(curves, axis=0).sum(axis=0) / len(self.trees), 0.0)

    def to_json(self) -> dict:
        p = self.params
        return {"format_version": MODEL_FORMAT_VERSION, "model": "forest",
                "variant": self.variant.value, "master_seed": self.master_seed,
                "params": {"n_trees": p.n_trees, "mtry": p.mtry,
                           "min_leaf_size": p.min_leaf_size, "max_depth": p.max_depth},
                "grid": {"times": self.grid.times.tolist(),
                         "is_event": self.grid.is_event.tolist()},
                "n_features": self.n_features,
                "trees": [t.to_json() for t in self.trees]}


def forest_fit(train, params: ForestParams | None = None, master_seed: int = 0,
               variant: Variant | str = Variant.ENSEMBLE_CHF) -> SurvivalForest:
    """Grow ``n_trees`` trees on bootstrap samples of ``train``.

    Tree k draws its bootstrap sample and candidate features from
    SplitMix64 seeded with ``derive_seed(master_seed, k)``.
    """
    params = params or ForestParams()
    variant = Variant(variant)
    if params.n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    X = np.ascontiguousarray(train.X)
    n = X.shape[0]
    if n == 0 or not train.event.any():
        raise UnfittableError("forest needs a non-empty training set with events")
    params.resolved_mtry(X.shape[1])
    grid = TimeGrid.from_data(train.time, train.event)
    trees = []
    failed = 0
    for k in range(params.n_trees):
        seed = derive_seed(master_seed, k)
        state = np.array([seed], dtype=np.uint64)
        samples = _tree.bootstrap(state, n)
        try:
            trees.append(grow_tree(X, train.time, train.event, samples, params,
                                   int(state[0]), grid))
        except UnfittableError:
            failed += 1
    if not trees:
        raise UnfittableError("every tree failed to grow")
    if failed:
        log.warning("%d of %d trees could not be grown", failed, params.n_trees)
    return SurvivalForest(tuple(trees), params, variant, int(master_seed), grid, X.shape[1],
                          failed)
