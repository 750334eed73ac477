"""Benchmark orchestration: seeded runs, reports, figures and the CLI."""

from .config import BenchConfig, ConfigError, replica_config, parse_seeds
from .outputs import emit_boxplot_svg, emit_table, render_boxplot_svg
from .report import BenchmarkReport, build_report
from .runner import BenchmarkRun, read_runs, replay_run, run_benchmark

__all__ = ["BenchConfig", "BenchmarkReport", "BenchmarkRun", "ConfigError", "build_report",
           "emit_boxplot_svg", "emit_table", "replica_config", "parse_seeds",
           "read_runs", "render_boxplot_svg", "replay_run", "run_benchmark"]
