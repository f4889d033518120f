"""Custom exception hierarchy for the augmentation study."""

from __future__ import annotations

from collections.abc import Iterable


class WoundAugError(Exception):
    """Base exception for all pipeline errors."""

    def __init__(self, message: str, details: str | None = None) -> None:
        self.message = message
        self.details = details
        super().__init__(self._format_message())

    def _format_message(self) -> str:
        if self.details:
            return f"{self.message}: {self.details}"
        return self.message


class ConfigError(WoundAugError):
    """Experiment configuration could not be read or is invalid."""

    pass


# =============================================================================
# Dataset
# =============================================================================


class DatasetError(WoundAugError):
    """Error related to dataset construction or manipulation."""

    pass


class MissingClassDirectoryError(DatasetError):
    """Ingest root lacks one subdirectory per class code."""

    def __init__(self, missing: Iterable[str], details: str | None = None) -> None:
        self.missing = sorted(missing)
        message = f"Missing class directories: {', '.join(self.missing)}"
        super().__init__(message, details)


class EmptyDatasetError(DatasetError):
    """Operation needs at least one sample."""

    def __init__(self, details: str | None = None) -> None:
        super().__init__("Dataset contains no samples", details)


class UnderpopulatedClassError(DatasetError):
    """A class has too few samples for the requested operation."""

    def __init__(self, label: str, count: int, required: int) -> None:
        self.label = label
        self.count = count
        self.required = required
        message = f"Class {label} has {count} samples, {required} required"
        super().__init__(message)


class ShapeMismatchError(DatasetError):
    """Array or dataset shapes disagree."""

    def __init__(
        self,
        expected: tuple[int, ...],
        actual: tuple[int, ...],
        details: str | None = None,
    ) -> None:
        self.expected = tuple(expected)
        self.actual = tuple(actual)
        message = f"Shape mismatch: expected {self.expected}, got {self.actual}"
        super().__init__(message, details)


class ManifestError(DatasetError):
    """Malformed or unreadable dataset manifest."""

    pass


# =============================================================================
# Augmentation
# =============================================================================


class AugmentationError(WoundAugError):
    """Invalid augmentation request."""

    pass


# =============================================================================
# Models
# =============================================================================


class BackboneError(WoundAugError):
    """Error building or running a feature extractor."""

    pass


class WeightsNotFoundError(BackboneError):
    """Pretrained adapter weights could not be located."""

    def __init__(self, adapter: str, searched: Iterable[str]) -> None:
        self.adapter = adapter
        self.searched = list(searched)
        details = (
            f"searched {', '.join(self.searched) or 'nothing'}. "
            f"Download the torchvision ImageNet weights for '{adapter}' "
            "(e.g. torch.save(torchvision.models.<arch>(weights='DEFAULT').state_dict(), path)) "
            "and set backbone.weights_path or $WOUNDAUG_WEIGHTS_DIR"
        )
        super().__init__(f"No pretrained weights for {adapter}", details)


class WeightsChecksumError(BackboneError):
    """Weight file does not match its declared checksum."""

    def __init__(self, path: str, expected: str, actual: str) -> None:
        self.path = path
        super().__init__(
            f"Checksum mismatch for {path}",
            f"expected sha256 {expected}, got {actual}",
        )


class TrainingError(WoundAugError):
    """Error while training a classification head."""

    pass


class TrainingDivergedError(TrainingError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, learning_rate: float, aggressive: bool) -> None:
        self.epoch = epoch
        self.learning_rate = learning_rate
        details = f"epoch {epoch}, learning rate {learning_rate:g}"
        if aggressive:
            details += " (learning rate is too aggressive; try 0.001 or lower)"
        super().__init__("Training loss became non-finite", details)


class GanError(WoundAugError):
    """Error while training or sampling a DE-GAN."""

    pass


class GanDivergedError(GanError):
    """GAN losses became non-finite."""

    def __init__(self, epoch: int, checkpoint: str | None) -> None:
        self.epoch = epoch
        self.checkpoint = checkpoint
        details = f"epoch {epoch}, last good checkpoint: {checkpoint or 'none'}"
        super().__init__("GAN loss became non-finite", details)


# =============================================================================
# Evaluation
# =============================================================================


class EvaluationError(WoundAugError):
    """Error computing evaluation metrics."""

    pass
