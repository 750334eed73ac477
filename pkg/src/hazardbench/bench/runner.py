"""Seeded benchmark execution.

One work unit is a (dataset, split seed) pair: split once, then fit and
score every configured model under every hyperparameter source.  All
randomness is derived from the split seed, so results do not depend on
which worker runs a unit or in what order.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import SplitSpec, load_bundled, standardize, train_test_split
from ..families import get_family
from ..metrics import concordance_index
from ..rng import derive_seed
from ..tuning import random_search_group
from .config import BenchConfig
from .report import BenchmarkReport, build_report

log = logging.getLogger(__name__)

SEARCH_STREAM = 1
MODEL_STREAM = 2
THREADS_ENV = "HAZARD_BENCH_THREADS"


@dataclass
class BenchmarkRun:
    dataset: str
    model: str
    source: str
    seed: int
    concordance: float | None
    configuration: dict
    error: str | None = None
    search: dict | None = None          # summary kept in the report
    search_trials: list | None = None   # full trial list, runs file only
    fit_seconds: float = 0.0
    predict_seconds: float = 0.0
    search_seconds: float = 0.0
    model_path: str | None = None

    TIMING = ("fit_seconds", "predict_seconds", "search_seconds")

    def to_json(self, timing: bool = True, trials: bool = True) -> dict:
        d = {"dataset": self.dataset, "model": self.model, "source": self.source,
             "seed": self.seed, "concordance": self.concordance,
             "configuration": self.configuration, "error": self.error,
             "search": self.search, "model_path": self.model_path}
        if trials:
            d["search_trials"] = self.search_trials
        if timing:
            d.update({k: getattr(self, k) for k in self.TIMING})
        return d

    @classmethod
    def from_json(cls, d):
        return cls(**{k: v for k, v in d.items() if k in cls.__dataclass_fields__})


_DATA_CACHE: dict = {}


def _load(name: str, drop_id: bool):
    key = (name, drop_id)
    if key not in _DATA_CACHE:
        _DATA_CACHE[key] = load_bundled(name, drop_id_feature=drop_id)
    return _DATA_CACHE[key]


def _groups_of(models):
    """Models sharing a fit are run together; order follows ``models``."""
    groups: list[list] = []
    by_key: dict = {}
    for tag in models:
        fam = get_family(tag)
        if fam.shared is None:
            groups.append([fam])
        elif fam.shared in by_key:
            by_key[fam.shared].append(fam)
        else:
            by_key[fam.shared] = [fam]
            groups.append(by_key[fam.shared])
    return groups


def _search_summary(result) -> dict:
    scored = [t for t in result.trials if t.fold_scores is not None]
    return {"skipped": result.skipped, "best_index": result.best_index,
            "n_trials": len(result.trials), "n_failed": len(result.trials) - len(scored),
            "best_cv_score": (result.trials[result.best_index].mean_score
                              if result.best_index >= 0 else None),
            "search_seed": result.search_seed}


def _models_for(config: BenchConfig, source: str):
    models = list(config.models)
    if source == "default":
        models += list(config.default_only)
    return models


def run_unit(config: BenchConfig, dataset: str, seed: int, only=None,
             model_dir: Path | None = None) -> list[BenchmarkRun]:
    """All runs of one (dataset, seed); ``only`` restricts to (model, source) pairs."""
    data = _load(dataset, config.drop_id_feature)
    train_raw, test_raw = train_test_split(data, SplitSpec(seed, config.test_fraction))
    train, test, _ = standardize(train_raw, test_raw)
    search_seed = derive_seed(seed, SEARCH_STREAM)
    model_seed = derive_seed(seed, MODEL_STREAM)
    runs = []
    for source in config.sources if only is None else sorted({s for _, s in only}):
        models = _models_for(config, source)
        if only is not None:
            models = [m for m in models if (m, source) in only]
        for group in _groups_of(models):
            runs += _run_group(group, source, dataset, seed, train_raw, train, test,
                               config, search_seed, model_seed, model_dir)
    return runs


def _run_group(group, source, dataset, seed, train_raw, train, test, config, search_seed,
               model_seed, model_dir):
    tags = [f.tag for f in group]
    searches = {}
    search_seconds = 0.0
    configs = {f.tag: dict(f.default_config) for f in group}
    if source == "search":
        t0 = time.perf_counter()
        try:
            # the search standardizes inside its own folds
            searches = random_search_group(group, train_raw, config.search_budget,
                                           config.folds, search_seed)
        except Exception as exc:  # recorded, never fatal
            err = f"search failed: {type(exc).__name__}: {exc}"
            return [BenchmarkRun(dataset, t, source, seed, None, {}, err) for t in tags]
        search_seconds = time.perf_counter() - t0
        configs = {t: r.best_configuration for t, r in searches.items()}
    # members of a group share a fit only when they share a configuration
    fitted = {}
    runs = []
    for fam in group:
        cfg = configs[fam.tag]
        key = json.dumps(cfg, sort_keys=True)
        run = BenchmarkRun(dataset, fam.tag, source, seed, None, cfg,
                           search_seconds=search_seconds)
        if fam.tag in searches:
            run.search = _search_summary(searches[fam.tag])
            run.search_trials = [t.to_json() for t in searches[fam.tag].trials]
        try:
            t0 = time.perf_counter()
            if key not in fitted:
                fitted[key] = fam.fit(train, cfg, model_seed)
            model = fam.view(fitted[key]) if fam.view is not None else fitted[key]
            run.fit_seconds = time.perf_counter() - t0
            t0 = time.perf_counter()
            risk = model.predict_risk(test.X)
            run.concordance = float(concordance_index(test.time, test.event, risk).index)
            run.predict_seconds = time.perf_counter() - t0
            if model_dir is not None:
                path = model_dir / f"{dataset}_{fam.tag}_{source}_{seed}.json"
                path.write_text(json.dumps(model.to_json()))
                run.model_path = str(Path(model_dir.name) / path.name)
        except Exception as exc:  # recorded, never fatal
            run.error = f"{type(exc).__name__}: {exc}"
            log.warning("%s/%s/%s seed %d failed: %s", dataset, fam.tag, source, seed,
                        run.error)
        runs.append(run)
    return runs


def worker_count(requested: int | None = None) -> int:
    n = requested or os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _unit_task(args):
    config, dataset, seed, model_dir = args
    return run_unit(config, dataset, seed, model_dir=model_dir)


def run_benchmark(config: BenchConfig, out_dir=None, workers: int | None = None,
                  progress=None) -> BenchmarkReport:
    """Run every (dataset, seed) unit and assemble the report.

    With ``out_dir``, writes ``config.json``, ``runs.jsonl`` (with timings
    and search trials) and ``report.json`` (without timings).
    """
    for d in config.datasets:
        _load(d, config.drop_id_feature)   # fail fast on unreadable data
    model_dir = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(json.dumps(config.to_json(), indent=2) + "\n")
        if config.save_models:
            model_dir = out_dir / "models"
            model_dir.mkdir(exist_ok=True)
    units = [(config, d, s, model_dir) for d in config.datasets for s in config.seeds]
    n_workers = min(worker_count(workers), len(units))
    results = []
    if n_workers == 1:
        for i, u in enumerate(units):
            results.append(_unit_task(u))
            if progress:
                progress(i + 1, len(units))
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            for i, r in enumerate(pool.map(_unit_task, units)):
                results.append(r)
                if progress:
                    progress(i + 1, len(units))
    runs = [r for unit in results for r in unit]
    report = build_report(config, runs)
    if out_dir is not None:
        with open(out_dir / "runs.jsonl", "w") as fh:
            for r in runs:
                fh.write(json.dumps(r.to_json()) + "\n")
        report.write(out_dir / "report.json")
    return report


def replay_run(config: BenchConfig, dataset: str, model: str, source: str,
               seed: int) -> BenchmarkRun:
    """Re-execute one run from its split seed and configuration."""
    runs = run_unit(config, dataset, seed, only={(model, source)})
    return runs[0]


def read_runs(path) -> list[BenchmarkRun]:
    with open(path) as fh:
        return [BenchmarkRun.from_json(json.loads(line)) for line in fh if line.strip()]


def mean_concordance(runs) -> float:
    vals = [r.concordance for r in runs if r.concordance is not None]
    return float(np.mean(vals)) if vals else float("nan")
