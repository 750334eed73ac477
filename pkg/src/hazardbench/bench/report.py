"""Aggregated benchmark report: per-group statistics and ordering checks."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..metrics import boxplot_stats

REPORT_FORMAT_VERSION = 1

# (name, dataset, (model, source) lhs, (model, source) rhs, margin): lhs mean >= rhs mean + margin
ORDERING_CHECKS = (
    ("rsf_vs_cox_pbc", "pbc", ("rsf", "search"), ("cox", "search"), -0.01),
    ("rsf_ann_vs_cox_gbcsg2", "gbcsg2", ("rsf_ann", "search"), ("cox", "search"), 0.015),
)
# (name, dataset, a, b, tolerance): |mean a - mean b| <= tolerance
AGREEMENT_CHECKS = (
    ("linear_deepsurv_vs_cox_pbc", "pbc", ("deepsurv_linear", "default"), ("cox", "default"),
     0.03),
)


@dataclass
class BenchmarkReport:
    config: dict
    environment: dict
    groups: list
    checks: list

    @property
    def incomplete(self) -> bool:
        return any(g["incomplete"] for g in self.groups)

    def group(self, dataset, model, source) -> dict | None:
        for g in self.groups:
            if (g["dataset"], g["model"], g["source"]) == (dataset, model, source):
                return g
        return None

    def to_json(self) -> dict:
        return {"format_version": REPORT_FORMAT_VERSION, "environment": self.environment,
                "config": self.config, "incomplete": self.incomplete,
                "groups": self.groups, "checks": self.checks}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, d):
        if d.get("format_version") != REPORT_FORMAT_VERSION:
            raise ValueError(f"unsupported report format {d.get('format_version')!r}")
        return cls(d["config"], d["environment"], d["groups"], d["checks"])

    @classmethod
    def load(cls, path) -> BenchmarkReport:
        return cls.from_json(json.loads(Path(path).read_text()))


def _group_entry(dataset, model, source, seeds, runs) -> dict:
    by_seed = {r.seed: r for r in runs}
    entries = []
    for s in seeds:
        r = by_seed.get(s)
        if r is None:
            entries.append({"seed": s, "concordance": None, "error": "missing run",
                            "configuration": None, "search": None, "model_path": None})
        else:
            entries.append(r.to_json(timing=False, trials=False) | {"seed": s})
    for e in entries:
        for k in ("dataset", "model", "source"):
            e.pop(k, None)
    values = [e["concordance"] for e in entries if e["concordance"] is not None]
    flags = []
    n_failed = len(entries) - len(values)
    if n_failed:
        flags.append("incomplete")
    if source == "search" and any((e["search"] or {}).get("skipped") for e in entries):
        flags.append("search_skipped")
    return {"dataset": dataset, "model": model, "source": source,
            "n_runs": len(values), "n_failed": n_failed, "incomplete": n_failed > 0,
            "flags": flags, "runs": entries,
            "stats": boxplot_stats(values).to_json() if values else None}


def _mean(groups, dataset, model, source):
    for g in groups:
        if (g["dataset"], g["model"], g["source"]) == (dataset, model, source) and g["stats"]:
            return g["stats"]["mean"]
    return None


def evaluate_checks(groups) -> list[dict]:
    """Ordering and agreement checks whose groups are present; failures are flags only."""
    out = []
    for name, ds, lhs, rhs, margin in ORDERING_CHECKS:
        a, b = _mean(groups, ds, *lhs), _mean(groups, ds, *rhs)
        if a is None or b is None:
            continue
        out.append({"name": name, "dataset": ds, "kind": "ordering",
                    "lhs": list(lhs), "rhs": list(rhs), "lhs_mean": a, "rhs_mean": b,
                    "margin": margin, "passed": bool(a >= b + margin)})
    for name, ds, lhs, rhs, tol in AGREEMENT_CHECKS:
        a, b = _mean(groups, ds, *lhs), _mean(groups, ds, *rhs)
        if a is None or b is None:
            continue
        out.append({"name": name, "dataset": ds, "kind": "agreement",
                    "lhs": list(lhs), "rhs": list(rhs), "lhs_mean": a, "rhs_mean": b,
                    "tolerance": tol, "passed": bool(abs(a - b) <= tol)})
    return out


def build_report(config, runs) -> BenchmarkReport:
    index: dict = {}
    for r in runs:
        index.setdefault((r.dataset, r.model, r.source), []).append(r)
    groups = [_group_entry(d, m, s, config.seeds, index.get((d, m, s), []))
              for d, m, s in config.groups()]
    env = {"hazardbench_version": __version__, "config_hash": config.config_hash(),
           "numpy_version": np.__version__}
    return BenchmarkReport(config.to_json(), env, groups, evaluate_checks(groups))


def group_values(group) -> list[float]:
    return [r["concordance"] for r in group["runs"] if r["concordance"] is not None]
