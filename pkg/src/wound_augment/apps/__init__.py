"""Experiment applications: the transfer-learning grid and the full pipeline."""

from wound_augment.apps.grid import GridPointResult, run_grid, select_best
from wound_augment.apps.pipeline import (
    ExperimentRunner,
    Finding,
    run_experiment,
    validate_config,
)

__all__ = [
    "GridPointResult",
    "run_grid",
    "select_best",
    "ExperimentRunner",
    "Finding",
    "run_experiment",
    "validate_config",
]
