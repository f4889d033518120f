"""Geometric data augmentation."""

from wound_augment.augment.geometric import (
    adjust_brightness,
    augment_dataset,
    rotate,
)

__all__ = ["adjust_brightness", "augment_dataset", "rotate"]
