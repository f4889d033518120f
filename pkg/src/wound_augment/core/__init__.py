"""Core functionality - configuration, seeds, exceptions."""

from wound_augment.core.config import (
    CLASS_CODES,
    DEFAULT_CATALOG,
    AugmentationPolicy,
    BackboneName,
    BackboneSpec,
    ClassLabel,
    Condition,
    ConditionSpec,
    ExperimentConfig,
    FillMode,
    GanConfig,
    GridSpec,
    Origin,
    SplitSpec,
    TrainConfig,
    load_experiment_config,
)
from wound_augment.core.exceptions import (
    ConfigError,
    DatasetError,
    EvaluationError,
    GanError,
    TrainingError,
    WoundAugError,
)
from wound_augment.core.seeding import derive_seed

__all__ = [
    "CLASS_CODES",
    "DEFAULT_CATALOG",
    "AugmentationPolicy",
    "BackboneName",
    "BackboneSpec",
    "ClassLabel",
    "Condition",
    "ConditionSpec",
    "ExperimentConfig",
    "FillMode",
    "GanConfig",
    "GridSpec",
    "Origin",
    "SplitSpec",
    "TrainConfig",
    "load_experiment_config",
    "ConfigError",
    "DatasetError",
    "EvaluationError",
    "GanError",
    "TrainingError",
    "WoundAugError",
    "derive_seed",
]
