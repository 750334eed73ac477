"""Command line entry point: ``bench run``, ``bench plot`` and ``bench table``."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from ..dataset import DatasetError
from .config import DATASETS, BENCH_MODELS, BenchConfig, ConfigError, parse_seeds
from .outputs import emit_boxplot_svg, emit_table
from .report import BenchmarkReport
from .runner import run_benchmark

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATASET = 3
EXIT_INCOMPLETE = 4


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress and warnings.")
def main(verbose):
    """Seeded survival-model benchmark on PBC and GBCSG2."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--dataset", type=click.Choice(["pbc", "gbcsg2", "both"]), default="both",
              show_default=True)
@click.option("--models", default="all", show_default=True,
              help="Comma-separated model tags, or 'all' for all seven benchmark models.")
@click.option("--source", type=click.Choice(["default", "search", "both"]), default="both",
              show_default=True)
@click.option("--seeds", default="0..24", show_default=True,
              help="Split seeds, e.g. '0..24' or '1,3,5'.")
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--search-budget", type=int, default=50, show_default=True)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--drop-id-feature", is_flag=True, help="Drop the PBC id column.")
@click.option("--save-models", is_flag=True, help="Write each fitted model as JSON.")
@click.option("--linear-check/--no-linear-check", default=True, show_default=True,
              help="Also run the linear DeepSurv network with default settings.")
@click.option("--workers", type=int, default=None,
              help="Worker processes (capped by HAZARD_BENCH_THREADS).")
def run(dataset, models, source, seeds, test_fraction, search_budget, folds, out_dir,
        drop_id_feature, save_models, linear_check, workers):
    """Split, optionally search, fit and score every model on every seed."""
    try:
        config = BenchConfig(
            datasets=DATASETS if dataset == "both" else (dataset,),
            models=BENCH_MODELS if models == "all" else tuple(
                m.strip() for m in models.split(",") if m.strip()),
            sources=("default", "search") if source == "both" else (source,),
            seeds=parse_seeds(seeds), test_fraction=test_fraction,
            search_budget=search_budget, folds=folds, drop_id_feature=drop_id_feature,
            save_models=save_models,
            default_only=("deepsurv_linear",) if linear_check and "default" in (
                ("default", "search") if source == "both" else (source,)) else ())
    except ConfigError as exc:
        _fail(str(exc), EXIT_CONFIG)

    def progress(done, total):
        click.echo(f"[{done}/{total}] units done", err=True)

    try:
        report = run_benchmark(config, out_dir, workers=workers, progress=progress)
    except DatasetError as exc:
        _fail(f"dataset: {exc}", EXIT_DATASET)
    out = Path(out_dir)
    for d in config.datasets:
        emit_boxplot_svg(report, d, out / f"boxplot_{d}.svg")
    emit_table(report, out / "table.csv")
    for g in report.groups:
        st = g["stats"]
        mean = f"{st['mean']:.4f}" if st else "   n/a"
        click.echo(f"{g['dataset']:7s} {g['model']:16s} {g['source']:8s} mean {mean} "
                   f"runs {g['n_runs']:3d} failed {g['n_failed']}")
    for c in report.checks:
        click.echo(f"check {c['name']}: {'ok' if c['passed'] else 'FLAGGED'} "
                   f"({c['lhs_mean']:.4f} vs {c['rhs_mean']:.4f})")
    if report.incomplete:
        _fail("some runs failed; see report.json", EXIT_INCOMPLETE)


def _load_report(path):
    try:
        return BenchmarkReport.load(path)
    except (OSError, ValueError, KeyError) as exc:
        _fail(f"cannot read report {path}: {exc}", EXIT_CONFIG)


@main.command()
@click.option("--report", "report_path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def plot(report_path, out_dir):
    """One boxplot SVG per dataset in the report."""
    report = _load_report(report_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for d in report.config["datasets"]:
        path = emit_boxplot_svg(report, d, out / f"boxplot_{d}.svg")
        if path is not None:
            click.echo(str(path))


@main.command()
@click.option("--report", "report_path", type=click.Path(dir_okay=False), required=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def table(report_path, out_path):
    """CSV of per-group summary statistics."""
    click.echo(str(emit_table(_load_report(report_path), out_path)))


if __name__ == "__main__":
    main()
