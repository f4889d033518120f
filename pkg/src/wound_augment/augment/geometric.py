"""Seeded geometric augmentation: rotation and brightness shifts."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from wound_augment.core.config import AugmentationPolicy, FillMode, Origin
from wound_augment.core.exceptions import AugmentationError
from wound_augment.core.seeding import derive_seed, numpy_rng
from wound_augment.data.dataset import ImageSample, LabeledDataset

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

SCIPY_MODES: dict[FillMode, str] = {
    FillMode.CONSTANT_BLACK: "constant",
    FillMode.NEAREST_EDGE: "nearest",
}


def rotate_pixels(
    pixels: NDArray[np.float32],
    angle_deg: float,
    fill_mode: FillMode = FillMode.NEAREST_EDGE,
) -> NDArray[np.float32]:
    """Rotate an H x W x C array counter-clockwise about its center.

    Bilinear resampling, output shape equal to input shape.
    """
    if angle_deg == 0.0:
        return pixels.astype(np.float32, copy=True)
    rotated = ndimage.rotate(
        pixels,
        angle_deg,
        axes=(0, 1),
        reshape=False,
        order=1,
        mode=SCIPY_MODES[fill_mode],
        cval=0.0,
    )
    return np.clip(rotated, 0.0, 1.0).astype(np.float32)


def rotate(
    img: ImageSample,
    angle_deg: float,
    fill_mode: FillMode = FillMode.NEAREST_EDGE,
) -> ImageSample:
    """Rotate a sample; label and source_id are preserved.

    Raises:
        AugmentationError: If the angle is outside [-180, 180].
    """
    if not -180.0 <= angle_deg <= 180.0:
        raise AugmentationError(f"Rotation angle {angle_deg} outside [-180, 180]")
    return img.derive(rotate_pixels(img.pixels, angle_deg, fill_mode), Origin.GEOMETRIC_AUG)


def adjust_brightness(img: ImageSample, delta: float) -> ImageSample:
    """Add ``delta`` to every channel value, clamped to [0, 1].

    Raises:
        AugmentationError: If ``|delta| > 1``.
    """
    if abs(delta) > 1.0:
        raise AugmentationError(f"Brightness delta {delta} outside [-1, 1]")
    shifted = np.clip(img.pixels + np.float32(delta), 0.0, 1.0)
    return img.derive(shifted, Origin.GEOMETRIC_AUG)


def augment_sample(
    sample: ImageSample,
    index: int,
    policy: AugmentationPolicy,
) -> ImageSample:
    """Transform one sample from its own stream, keyed by ``(policy.seed, index)``.

    Draw order is fixed: angle, delta, coin. The coin picks rotation (< 0.5)
    or brightness; ``compose_both`` applies rotation then brightness.
    """
    rng = numpy_rng(policy.seed, index)
    angle = float(rng.uniform(0.0, policy.rotation_max_deg))
    low = -policy.brightness_max_delta if policy.signed_brightness else 0.0
    delta = float(rng.uniform(low, policy.brightness_max_delta))
    use_rotation = bool(rng.random() < 0.5)

    out = sample
    if policy.compose_both or use_rotation:
        out = rotate(out, angle, policy.fill_mode)
    if policy.compose_both or not use_rotation:
        out = adjust_brightness(out, delta)
    if policy.concatenate:
        out = out.derive(out.pixels, Origin.GEOMETRIC_AUG, f"{sample.source_id}#geo")
    return out


def augment_dataset(
    ds: LabeledDataset,
    policy: AugmentationPolicy,
    max_workers: int | None = None,
) -> LabeledDataset:
    """Produce the geometrically augmented counterpart of ``ds``.

    Sample ``i`` of the output is the transform of sample ``i`` of the input.
    With ``policy.concatenate`` the originals come first and the augmented
    copies follow, doubling the size.

    Raises:
        AugmentationError: If ``ds`` is empty.
    """
    if len(ds) == 0:
        raise AugmentationError("Cannot augment an empty dataset")

    indexed = list(enumerate(ds.samples))
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            augmented = list(
                pool.map(lambda item: augment_sample(item[1], item[0], policy), indexed)
            )
    else:
        augmented = [augment_sample(sample, i, policy) for i, sample in indexed]

    logger.info(
        "Augmented %d samples (rotation <= %.1f deg, brightness <= %.2f, seed %d)",
        len(augmented),
        policy.rotation_max_deg,
        policy.brightness_max_delta,
        policy.seed,
    )
    if policy.concatenate:
        return ds.with_samples(list(ds.samples) + augmented)
    return ds.with_samples(augmented)


def epoch_policy(policy: AugmentationPolicy, epoch: int) -> AugmentationPolicy:
    """Policy re-seeded for one epoch of per-epoch re-augmentation."""
    return policy.model_copy(update={"seed": derive_seed(policy.seed, "epoch", epoch)})
