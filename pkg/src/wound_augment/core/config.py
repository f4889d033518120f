"""Configuration constants, enumerations and typed experiment configs."""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from wound_augment.core.exceptions import ConfigError

# =============================================================================
# Dataset
# =============================================================================
DEFAULT_SHAPE: tuple[int, int, int] = (16, 16, 3)  # desk-scale images
DEFAULT_TRAIN_FRACTION: float = 0.8  # 80-20 split
DEFAULT_BALANCE_PER_CLASS: int = 75  # "about 75 images from each category"
IMAGE_EXTENSIONS: tuple[str, ...] = (".png", ".jpg", ".jpeg")

# =============================================================================
# Geometric Augmentation
# =============================================================================
DEFAULT_ROTATION_MAX_DEG: float = 30.0
DEFAULT_BRIGHTNESS_MAX_DELTA: float = 0.2

# =============================================================================
# Transfer Learning
# =============================================================================
STUDY_EPOCHS: tuple[int, ...] = (10, 30, 50)
STUDY_LEARNING_RATES: tuple[float, ...] = (0.01, 0.001, 0.0001, 0.05, 0.0005)
DEFAULT_EPOCHS: int = 30
DEFAULT_LEARNING_RATE: float = 0.001
DEFAULT_BATCH_SIZE: int = 16
DEFAULT_EARLY_STOP_PATIENCE: int = 5
EARLY_STOP_MIN_DELTA: float = 1e-4
AGGRESSIVE_LEARNING_RATE: float = 0.01  # 0.01 and 0.05 trained worst
TINY_CNN_FEATURE_DIM: int = 32

# Pooled feature width of each pretrained adapter
ADAPTER_FEATURE_DIMS: dict[str, int] = {
    "mobilenetv2-adapter": 1280,
    "resnet50-adapter": 2048,
    "vgg16-adapter": 512,
}
WEIGHTS_DIR_ENV: str = "WOUNDAUG_WEIGHTS_DIR"

# =============================================================================
# DE-GAN
# =============================================================================
DEFAULT_GAN_INFLATE: int = 14  # class D inflated by 14 images
DEFAULT_GAN_EPOCHS: int = 500  # desk regimen; full runs use 3000-6000
DEFAULT_GAN_LEARNING_RATE: float = 2e-4
DEFAULT_LATENT_DIM: int = 16
DEFAULT_COLLAPSE_THRESHOLD: float = 0.01


class ClassLabel(str, Enum):
    """Wound categories of the six-class dataset."""

    BG = "BG"
    D = "D"
    N = "N"
    P = "P"
    S = "S"
    V = "V"

    @property
    def display_name(self) -> str:
        """Category name as used in the dataset tables."""
        return CLASS_DISPLAY_NAMES[self]


CLASS_DISPLAY_NAMES: dict[ClassLabel, str] = {
    ClassLabel.BG: "Background (class BG)",
    ClassLabel.D: "Diabetic (class D)",
    ClassLabel.N: "Not an Ulcer (class N)",
    ClassLabel.P: "Pressure (class P)",
    ClassLabel.S: "Surgical (class S)",
    ClassLabel.V: "Venous (class V)",
}

DEFAULT_CATALOG: tuple[ClassLabel, ...] = tuple(ClassLabel)
CLASS_CODES: tuple[str, ...] = tuple(label.value for label in ClassLabel)


class Origin(str, Enum):
    """Provenance of an image sample."""

    REAL = "real"
    GEOMETRIC_AUG = "geometric-aug"
    GAN_SYNTHETIC = "gan-synthetic"


class Condition(str, Enum):
    """Experimental conditions compared in the study."""

    XFER_ONLY = "xfer-only"
    GEOMETRIC_AUG = "geometric-aug"
    DEGAN_AUG = "degan-aug"
    COMBINED_AUG = "combined-aug"


class FillMode(str, Enum):
    """How out-of-frame regions are filled after rotation."""

    CONSTANT_BLACK = "constant-black"
    NEAREST_EDGE = "nearest-edge"


class BackboneName(str, Enum):
    """Available feature extractors."""

    TINY_CNN = "tiny-cnn"
    MOBILENETV2 = "mobilenetv2-adapter"
    RESNET50 = "resnet50-adapter"
    VGG16 = "vgg16-adapter"

    @property
    def is_adapter(self) -> bool:
        return self is not BackboneName.TINY_CNN


class Severity(str, Enum):
    """Config validation finding severity."""

    ERROR = "error"
    WARNING = "warning"


PositiveInt = Annotated[int, Field(gt=0)]
PositiveFloat = Annotated[float, Field(gt=0)]
Shape = tuple[PositiveInt, PositiveInt, PositiveInt]


class SplitSpec(BaseModel):
    """Train/test split parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    train_fraction: float = Field(default=DEFAULT_TRAIN_FRACTION, gt=0.0, lt=1.0)
    seed: int = 0
    stratified: bool = True


class AugmentationPolicy(BaseModel):
    """Parameter ranges for the seeded geometric transforms."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rotation_max_deg: float = Field(default=DEFAULT_ROTATION_MAX_DEG, ge=0.0, le=180.0)
    brightness_max_delta: float = Field(default=DEFAULT_BRIGHTNESS_MAX_DELTA, ge=0.0, le=1.0)
    fill_mode: FillMode = FillMode.NEAREST_EDGE
    seed: int = 0
    compose_both: bool = False  # apply rotation and brightness to every image
    signed_brightness: bool = False  # draw delta from [-max, max]
    concatenate: bool = False  # keep originals alongside the augmented set


class BackboneSpec(BaseModel):
    """Frozen feature extractor selection."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: BackboneName = BackboneName.TINY_CNN
    input_shape: Shape = DEFAULT_SHAPE
    feature_dim: PositiveInt | None = None
    frozen: bool = True
    weights_path: str | None = None
    weights_sha256: str | None = None
    init_seed: int = 0  # tiny-cnn only

    @property
    def resolved_feature_dim(self) -> int:
        """Declared feature width, defaulting per backbone."""
        if self.feature_dim is not None:
            return self.feature_dim
        if self.name.is_adapter:
            return ADAPTER_FEATURE_DIMS[self.name.value]
        return TINY_CNN_FEATURE_DIM


class TrainConfig(BaseModel):
    """Classification head training run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    backbone: BackboneSpec = Field(default_factory=BackboneSpec)
    head_hidden: list[PositiveInt] = Field(default_factory=list)
    num_classes: PositiveInt = len(DEFAULT_CATALOG)
    epochs: PositiveInt = DEFAULT_EPOCHS
    learning_rate: PositiveFloat = DEFAULT_LEARNING_RATE
    batch_size: PositiveInt = DEFAULT_BATCH_SIZE
    seed: int = 0
    early_stop_patience: PositiveInt | None = DEFAULT_EARLY_STOP_PATIENCE
    reaugment_each_epoch: bool = False

    def label(self) -> str:
        """Short identifier used in run ids and plots."""
        return f"{self.backbone.name.value}-e{self.epochs}-lr{self.learning_rate:g}"


class GridSpec(BaseModel):
    """Hyperparameter grid swept during transfer learning."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs_list: list[PositiveInt] = Field(default_factory=lambda: list(STUDY_EPOCHS), min_length=1)
    lr_list: list[PositiveFloat] = Field(
        default_factory=lambda: list(STUDY_LEARNING_RATES), min_length=1
    )
    backbones: list[BackboneSpec] = Field(
        default_factory=lambda: [BackboneSpec()], min_length=1
    )
    head_hidden: list[PositiveInt] = Field(default_factory=list)
    batch_size: PositiveInt = DEFAULT_BATCH_SIZE
    early_stop_patience: PositiveInt | None = DEFAULT_EARLY_STOP_PATIENCE

    def configs(self, num_classes: int, seed: int) -> list[TrainConfig]:
        """Expand the grid in backbone, epochs, learning-rate order."""
        return [
            TrainConfig(
                backbone=backbone,
                head_hidden=list(self.head_hidden),
                num_classes=num_classes,
                epochs=epochs,
                learning_rate=lr,
                batch_size=self.batch_size,
                seed=seed,
                early_stop_patience=self.early_stop_patience,
            )
            for backbone in self.backbones
            for epochs in self.epochs_list
            for lr in self.lr_list
        ]


class GanConfig(BaseModel):
    """DE-GAN shapes, loss weights and training regimen."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    image_shape: Shape = DEFAULT_SHAPE
    latent_dim: PositiveInt = DEFAULT_LATENT_DIM
    lambda_adv: float = Field(default=1.0, ge=0.0)
    lambda_hid: float = Field(default=1.0, ge=0.0)
    epochs: PositiveInt = DEFAULT_GAN_EPOCHS
    learning_rate: PositiveFloat = DEFAULT_GAN_LEARNING_RATE
    batch_size: PositiveInt = DEFAULT_BATCH_SIZE
    seed: int = 0
    base_channels: PositiveInt = 32
    grayscale: bool = False
    disc_extra_layers: int = Field(default=0, ge=0)
    minibatch_std: bool = True
    vae_pretrain_epochs: int = Field(default=0, ge=0)
    checkpoint_every: PositiveInt | None = None
    sample_every: PositiveInt | None = None

    @model_validator(mode="after")
    def _check(self) -> GanConfig:
        if self.lambda_adv + self.lambda_hid <= 0:
            raise ValueError("lambda_adv + lambda_hid must be positive")
        height, width, _ = self.image_shape
        if height % 4 or width % 4:
            raise ValueError(f"image height and width must be multiples of 4, got {height}x{width}")
        return self


class ConditionSpec(BaseModel):
    """One experimental condition and its augmentation settings."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Condition
    policy: AugmentationPolicy = Field(default_factory=AugmentationPolicy)
    gan: GanConfig = Field(default_factory=GanConfig)
    gan_class: ClassLabel = ClassLabel.D
    gan_count: PositiveInt = DEFAULT_GAN_INFLATE
    gan_source: Literal["train", "pre-balance"] = "train"
    curated_indices: list[int] | None = None
    reaugment_each_epoch: bool = False  # fresh geometric draws every epoch


class SyntheticSpec(BaseModel):
    """Bundled synthetic wound-like dataset parameters."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    per_class: PositiveInt = 20
    seed: int = 0


class ExperimentConfig(BaseModel):
    """Declarative description of a full three-phase experiment."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    dataset_root: str | None = None
    synthetic: SyntheticSpec | None = None
    shape: Shape = DEFAULT_SHAPE
    balance_per_class: PositiveInt = DEFAULT_BALANCE_PER_CLASS
    balance_strict: bool = False
    split: SplitSpec = Field(default_factory=SplitSpec)
    conditions: list[ConditionSpec] = Field(min_length=1)
    grid: GridSpec = Field(default_factory=GridSpec)
    output_dir: str = "runs/experiment"
    global_seed: int = 0
    max_workers: PositiveInt = 1
    collapse_threshold: float = Field(default=DEFAULT_COLLAPSE_THRESHOLD, ge=0.0)

    @model_validator(mode="after")
    def _check(self) -> ExperimentConfig:
        if self.dataset_root is None and self.synthetic is None:
            raise ValueError("either dataset_root or synthetic must be set")
        return self


# =============================================================================
# Config files
# =============================================================================


def set_dotted(data: dict[str, Any], dotted_key: str, value: Any) -> None:
    """Assign ``value`` at a dotted path, creating intermediate mappings.

    Numeric path components index into lists (``conditions.0.name``).
    """
    parts = dotted_key.split(".")
    node: Any = data
    for part in parts[:-1]:
        if isinstance(node, list):
            node = node[int(part)]
            continue
        if part not in node or node[part] is None:
            node[part] = {}
        node = node[part]
    last = parts[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value


def parse_override(text: str) -> tuple[str, Any]:
    """Split ``key=value`` with the value parsed as a YAML scalar."""
    if "=" not in text:
        raise ConfigError(f"Invalid override '{text}'", "expected key=value")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


def load_config_mapping(
    path: Path | str,
    overrides: list[str] | None = None,
) -> dict[str, Any]:
    """Read a YAML config file and apply ``key=value`` overrides."""
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot read config {path}", str(e)) from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a mapping")
    for override in overrides or []:
        key, value = parse_override(override)
        try:
            set_dotted(data, key, value)
        except (IndexError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Cannot apply override '{override}'", str(e)) from e
    return data


def load_experiment_config(
    path: Path | str,
    overrides: list[str] | None = None,
) -> ExperimentConfig:
    """Load and validate an experiment config file."""
    data = load_config_mapping(path, overrides)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}", str(e)) from e
