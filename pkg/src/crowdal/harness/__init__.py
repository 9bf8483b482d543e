"""Experiment harness: configs, grid runner, reports and the CLI."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .report import Report, emit_report, parse_pairs
from .runner import CellResult, ResultStore, cell_metrics, load_cells, run_experiment

__all__ = [
    "CellResult",
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "ResultStore",
    "cell_metrics",
    "emit_report",
    "load_cells",
    "load_config",
    "parse_config",
    "parse_pairs",
    "run_experiment",
]
