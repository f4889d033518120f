"""Wound Augment - geometric and DE-GAN augmentation for wound image classification."""

from wound_augment.core.config import (
    DEFAULT_CATALOG,
    DEFAULT_SHAPE,
    ClassLabel,
    Condition,
    ExperimentConfig,
    load_experiment_config,
)
from wound_augment.core.exceptions import (
    ConfigError,
    DatasetError,
    GanError,
    TrainingError,
    WoundAugError,
)

__version__ = "0.1.0"

__all__ = [
    # Config
    "DEFAULT_CATALOG",
    "DEFAULT_SHAPE",
    "ClassLabel",
    "Condition",
    "ExperimentConfig",
    "load_experiment_config",
    # Exceptions
    "WoundAugError",
    "ConfigError",
    "DatasetError",
    "GanError",
    "TrainingError",
]
