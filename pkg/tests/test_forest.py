import itertools

import numpy as np
import pytest

from hazardbench.dataset import SplitSpec, SurvivalDataset, standardize, train_test_split
from hazardbench.forest import (
    ForestParams, SurvivalForest, Variant, forest_fit, grow_tree, logrank_statistic,
)
from hazardbench.base import DimensionMismatchError, UnfittableError
from hazardbench.metrics import concordance_index, kaplan_meier
from oracles import literal_logrank


def exhaustive_root_split(X, time, event, min_leaf):
    """Best depth-1 split by enumerating every feature and midpoint."""
    n, m = X.shape
    best = (-1, 0.0, 0.0)
    if event.sum() < 2 or n < 2 * min_leaf:
        return best
    for f in range(m):
        vals = np.unique(X[:, f])
        for lo, hi in zip(vals[:-1], vals[1:]):
            thr = 0.5 * (lo + hi)
            if thr >= hi:
                thr = lo
            left = X[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            if not event[left].any() or not event[~left].any():
                continue
            stat = logrank_statistic((time[left], event[left]), (time[~left], event[~left]))
            if stat > best[2]:
                best = (f, thr, stat)
    return best


def random_small_dataset(rng, n=None, m=None):
    n = n or int(rng.integers(10, 201))
    m = m or int(rng.integers(1, 5))
    X = np.column_stack([
        rng.integers(0, 6, size=n).astype(float) if rng.random() < 0.4 else rng.normal(size=n)
        for _ in range(m)])
    time = rng.integers(1, 60, size=n).astype(float)
    event = rng.random(n) < 0.6
    return X, time, event


def test_logrank_matches_literal_loop(rng):
    for _ in range(100):
        na, nb = rng.integers(1, 20, size=2)
        ta = rng.integers(1, 10, size=na).astype(float)
        tb = rng.integers(1, 10, size=nb).astype(float)
        ea = rng.random(na) < 0.6
        eb = rng.random(nb) < 0.6
        got = logrank_statistic((ta, ea), (tb, eb))
        assert got == pytest.approx(literal_logrank(ta, ea, tb, eb), rel=1e-12, abs=1e-12)


def test_logrank_symmetry_and_identity():
    ta, ea = np.array([1.0, 3, 5, 7]), np.array([True, False, True, True])
    assert logrank_statistic((ta, ea), (ta, ea)) == 0.0
    tb, eb = np.array([2.0, 4, 9]), np.array([True, True, False])
    assert logrank_statistic((ta, ea), (tb, eb)) == pytest.approx(
        logrank_statistic((tb, eb), (ta, ea)), rel=1e-14)
    assert logrank_statistic(([1, 2], [False, False]), ([3], [False])) == 0.0


def test_logrank_separated_groups_beat_relabelings():
    t = np.array([1.0, 2, 10, 20])
    e = np.ones(4, bool)
    sep = logrank_statistic((t[:2], e[:2]), (t[2:], e[2:]))
    for a in itertools.combinations(range(4), 2):
        b = [i for i in range(4) if i not in a]
        if set(a) in ({0, 1}, {2, 3}):
            continue
        assert sep > logrank_statistic((t[list(a)], e[list(a)]), (t[b], e[b]))


def test_depth1_split_matches_exhaustive(rng):
    for _ in range(50):
        X, time, event = random_small_dataset(rng)
        min_leaf = int(rng.integers(1, 6))
        params = ForestParams(n_trees=1, mtry=X.shape[1], min_leaf_size=min_leaf, max_depth=1)
        tree = grow_tree(X, time, event, np.arange(len(time)), params, seed=1) \
            if event.any() else None
        if tree is None:
            continue
        f, thr, _ = exhaustive_root_split(X, time, event, min_leaf)
        assert tree.feature[0] == f
        if f >= 0:
            assert tree.threshold[0] == thr


def test_perfect_binary_separator():
    n = 40
    x = np.repeat([0.0, 1.0], n // 2)
    noise = np.random.default_rng(0).normal(size=n)
    time = np.where(x == 1, np.arange(n) + 1.0, np.arange(n) + 100.0)
    X = np.column_stack([noise, x])
    tree = grow_tree(X, time, np.ones(n, bool), np.arange(n),
                     ForestParams(mtry=2, min_leaf_size=1, max_depth=1), seed=3)
    assert tree.feature[0] == 1 and tree.threshold[0] == 0.5


def test_single_leaf_tree_is_global_km(rng):
    X, time, event = random_small_dataset(rng, n=30, m=2)
    event[0] = True
    tree = grow_tree(X, time, event, np.arange(30), ForestParams(min_leaf_size=30), seed=0)
    assert tree.n_nodes == 1
    assert tree.leaf_km(0) == kaplan_meier(time, event)


def test_tree_determinism(rng):
    X, time, event = random_small_dataset(rng, n=150, m=4)
    p = ForestParams(mtry=2, min_leaf_size=3)
    a = grow_tree(X, time, event, np.arange(150), p, seed=11)
    b = grow_tree(X, time, event, np.arange(150), p, seed=11)
    for name in ("feature", "threshold", "left", "right", "sample_order"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_tree_invariants(rng):
    X, time, event = random_small_dataset(rng, n=200, m=3)
    p = ForestParams(mtry=3, min_leaf_size=5)
    samples = np.arange(200)
    tree = grow_tree(X, time, event, samples, p, seed=5)
    leaves = tree.leaves
    # every row lands in exactly one leaf, the one holding it
    routed = tree.apply(X)
    owned = np.concatenate([tree.leaf_samples(l) for l in leaves])
    assert sorted(owned.tolist()) == list(range(200))
    for leaf in leaves:
        s = tree.leaf_samples(leaf)
        assert len(s) >= 5
        assert np.all(routed[s] == leaf)
        km = tree.leaf_km(leaf)
        assert np.all(np.diff(km.values) <= 0) and np.all((km.values >= 0) & (km.values <= 1))
        assert np.all(np.diff(tree.leaf_cumhaz(leaf).values) >= 0)
    for node in np.flatnonzero(tree.feature >= 0):
        for child in (tree.left[node], tree.right[node]):
            rows = np.concatenate([tree.leaf_samples(l) for l in leaves
                                   if _descends(tree, l, child)])
            assert event[rows].any()


def _descends(tree, leaf, ancestor):
    stack = [ancestor]
    while stack:
        node = stack.pop()
        if node == leaf:
            return True
        if tree.feature[node] >= 0:
            stack += [tree.left[node], tree.right[node]]
    return False


def _data(n=150, seed=0):
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, 4))
    time = r.exponential(np.exp(-X[:, 0])) * 100 + 1
    return SurvivalDataset(X, np.round(time), r.random(n) < 0.7, ("a", "b", "c", "d"))


def test_forest_single_tree_equals_tree():
    data = _data()
    forest = forest_fit(data, ForestParams(n_trees=1, min_leaf_size=5), master_seed=4)
    tree = forest.trees[0]
    np.testing.assert_array_equal(forest.predict_risk(data.X), tree.mortality[tree.apply(data.X)])


def test_forest_determinism_and_order_invariance():
    data = _data()
    a = forest_fit(data, ForestParams(n_trees=20, min_leaf_size=5), master_seed=9)
    b = forest_fit(data, ForestParams(n_trees=20, min_leaf_size=5), master_seed=9)
    assert a.predict_risk(data.X).tobytes() == b.predict_risk(data.X).tobytes()
    for variant in Variant:
        fa = SurvivalForest(a.trees, a.params, variant, 9, a.grid, a.n_features)
        rev = SurvivalForest(a.trees[::-1], a.params, variant, 9, a.grid, a.n_features)
        assert fa.predict_risk(data.X).tobytes() == rev.predict_risk(data.X).tobytes()


def test_ann_single_leaf_is_global_km():
    data = _data(40)
    forest = forest_fit(data, ForestParams(n_trees=1, min_leaf_size=40),
                        variant=Variant.ADAPTIVE_NN_KM)
    tree = forest.trees[0]
    s = tree.leaf_samples(0)
    km = kaplan_meier(data.time[s], data.event[s])
    curve = forest.predict_survival(data.X[0])
    np.testing.assert_allclose(curve.values, km(forest.grid.times))
    # km_area is the area of that curve up to the last training event time
    tau = forest.grid.times[forest.grid.horizon]
    assert -forest.predict_risk(data.X[:1])[0] == pytest.approx(km.area(tau), rel=1e-12)


def test_ann_average_within_leaf_envelope():
    data = _data(120, seed=3)
    forest = forest_fit(data, ForestParams(n_trees=15, min_leaf_size=5),
                        variant=Variant.ADAPTIVE_NN_KM)
    x = data.X[7]
    avg = forest.predict_survival(x).values
    curves = np.array([t.leaf_km(int(t.apply(x)[0]))(forest.grid.times) for t in forest.trees])
    assert np.all(avg >= curves.min(axis=0) - 1e-12)
    assert np.all(avg <= curves.max(axis=0) + 1e-12)


def test_earlier_leaf_means_higher_risk():
    # x <= 0.5 fails at 1..10, x > 0.5 at 50..59
    x = np.repeat([0.0, 1.0], 10)
    time = np.concatenate([np.arange(1, 11), np.arange(50, 60)]).astype(float)
    data = SurvivalDataset(x[:, None], time, np.ones(20, bool), ("x",))
    for variant in Variant:
        forest = forest_fit(data, ForestParams(n_trees=5, min_leaf_size=3, max_depth=1),
                            variant=variant)
        r = forest.predict_risk(np.array([[0.0], [1.0]]))
        assert r[0] > r[1]


def test_forest_errors():
    data = _data()
    forest = forest_fit(data, ForestParams(n_trees=2))
    with pytest.raises(DimensionMismatchError):
        forest.predict_risk(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        forest_fit(data, ForestParams(n_trees=2, mtry=9))
    nodata = SurvivalDataset(data.X, data.time, np.zeros(len(data), bool), data.feature_names)
    with pytest.raises(UnfittableError):
        forest_fit(nodata, ForestParams(n_trees=2))


def test_forest_json_roundtrip_fields():
    import json
    data = _data(60)
    d = forest_fit(data, ForestParams(n_trees=2, min_leaf_size=10)).to_json()
    s = json.dumps(d)
    assert json.loads(s)["params"]["n_trees"] == 2
    assert len(d["trees"]) == 2


@pytest.mark.slow
def test_pbc_default_forest_beats_07(pbc):
    scores = []
    for seed in range(25):
        train, test = train_test_split(pbc, SplitSpec(seed))
        forest = forest_fit(train, ForestParams(n_trees=100), master_seed=seed)
        scores.append(concordance_index(test.time, test.event, forest.predict_risk(test.X)).index)
    assert np.mean(scores) > 0.7
