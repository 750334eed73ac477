"""Model families: a tag, a fit function, a default configuration and a search space.

Every ``fit(train, config, seed)`` expects standardized features and returns a
fitted model exposing ``predict_risk`` and ``to_json``.  Configurations are
plain JSON-compatible dicts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

from .boosting import gbcox_fit
from .deepsurv import deepsurv_fit
from .forest import ForestParams, Variant, forest_fit
from .linear_models import aalen_fit, cox_fit, weibull_fit
from .tuning import Choice, IntRange, LogUniform, SearchSpace


@dataclass(frozen=True)
class ModelFamily:
    tag: str
    fit: Callable
    default_config: dict
    space: Callable[[int], SearchSpace] | None   # n_features -> space; None: no search
    shared: str | None = None     # families with the same key can share one fit
    view: Callable | None = None  # fitted shared model -> this family's model

    @property
    def searchable(self) -> bool:
        return self.space is not None


def _forest(variant):
    def fit(train, config, seed):
        params = ForestParams(n_trees=int(config["n_trees"]), mtry=config["mtry"],
                              min_leaf_size=int(config["min_leaf_size"]),
                              max_depth=config["max_depth"])
        return forest_fit(train, params, master_seed=seed, variant=variant)
    return fit


def _variant(variant):
    return lambda forest: replace(forest, variant=variant)


def _forest_space(m):
    return SearchSpace({"n_trees": Choice([100, 200, 500]), "mtry": IntRange(1, m),
                        "min_leaf_size": Choice([3, 5, 10, 20]),
                        "max_depth": Choice([None, 3, 5, 8])})


_FOREST_DEFAULT = {"n_trees": 200, "mtry": None, "min_leaf_size": 10, "max_depth": None}


def _deepsurv(train, config, seed):
    return deepsurv_fit(train, hidden=tuple(config["hidden"]),
                        activation=config.get("activation", "relu"),
                        learning_rate=config["learning_rate"], epochs=int(config["epochs"]),
                        l2_lambda=config["l2_lambda"], init_seed=seed)


FAMILIES: dict[str, ModelFamily] = {f.tag: f for f in (
    ModelFamily("cox", lambda tr, c, s: cox_fit(tr, ridge=c["ridge"]), {"ridge": 0.0},
                lambda m: SearchSpace({"ridge": LogUniform(1e-6, 1.0)})),
    ModelFamily("aalen", lambda tr, c, s: aalen_fit(tr, ridge=c["ridge"]), {"ridge": 1e-6},
                lambda m: SearchSpace({"ridge": LogUniform(1e-8, 1e-2)})),
    ModelFamily("weibull", lambda tr, c, s: weibull_fit(tr), {}, None),
    ModelFamily("rsf", _forest(Variant.ENSEMBLE_CHF), _FOREST_DEFAULT, _forest_space,
                "forest", _variant(Variant.ENSEMBLE_CHF)),
    ModelFamily("rsf_ann", _forest(Variant.ADAPTIVE_NN_KM), _FOREST_DEFAULT, _forest_space,
                "forest", _variant(Variant.ADAPTIVE_NN_KM)),
    ModelFamily("gbcox",
                lambda tr, c, s: gbcox_fit(tr, n_stages=int(c["n_stages"]),
                                           learning_rate=c["learning_rate"],
                                           max_depth=int(c["max_depth"]),
                                           subsample=c["subsample"], seed=s),
                {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3, "subsample": 1.0},
                lambda m: SearchSpace({"n_stages": IntRange(50, 500),
                                       "learning_rate": LogUniform(0.01, 0.3),
                                       "max_depth": Choice([1, 2, 3, 4]),
                                       "subsample": Choice([0.5, 0.8, 1.0])})),
    ModelFamily("deepsurv", _deepsurv,
                {"hidden": [16], "learning_rate": 1e-3, "l2_lambda": 1e-3, "epochs": 500},
                lambda m: SearchSpace({"hidden": Choice([[8], [16], [32], [16, 16]]),
                                       "learning_rate": LogUniform(1e-4, 1e-2),
                                       "l2_lambda": LogUniform(1e-5, 1e-1),
                                       "epochs": Choice([200, 500, 1000])})),
    # diagnostic: a network without hidden layers is a Cox model
    ModelFamily("deepsurv_linear", _deepsurv,
                {"hidden": [], "learning_rate": 0.05, "l2_lambda": 0.0, "epochs": 2000}, None),
)}


def get_family(tag: str) -> ModelFamily:
    try:
        return FAMILIES[tag]
    except KeyError:
        raise KeyError(f"unknown model {tag!r}; known: {', '.join(FAMILIES)}") from None
