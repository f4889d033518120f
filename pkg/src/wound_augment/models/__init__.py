"""Feature extractors, classification heads and the DE-GAN."""

from wound_augment.models.backbone import FeatureExtractor, build_backbone, extract
from wound_augment.models.classifier import (
    TrainedModel,
    evaluate,
    load_model,
    predict,
    save_model,
    train,
)
from wound_augment.models.degan import (
    DiversityReport,
    GanModel,
    diversity,
    generate,
    load_gan,
    reconstruct,
    save_gan,
    train_gan,
)

__all__ = [
    "FeatureExtractor",
    "build_backbone",
    "extract",
    "TrainedModel",
    "evaluate",
    "load_model",
    "predict",
    "save_model",
    "train",
    "DiversityReport",
    "GanModel",
    "diversity",
    "generate",
    "load_gan",
    "reconstruct",
    "save_gan",
    "train_gan",
]
