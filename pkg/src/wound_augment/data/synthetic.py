"""Synthetic wound-like images for running every pipeline path without real data.

Each class has a distinctive color and shape drawn on a noisy skin-tone
background (BG uses a backdrop with no skin):

    BG  flat green backdrop        D  dark red blob       N  pale blob
    P   purple blob                S  dark ring           V  yellow ring

Position, radius, color and pixel noise are jittered per image, so classes
are easy to separate while individual images still differ.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from wound_augment.core.config import DEFAULT_CATALOG, DEFAULT_SHAPE, ClassLabel, Origin
from wound_augment.core.seeding import numpy_rng
from wound_augment.data.dataset import ImageSample, LabeledDataset
from wound_augment.data.manifest import save_png

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

SKIN_RGB: tuple[float, float, float] = (0.87, 0.68, 0.55)
BACKDROP_RGB: tuple[float, float, float] = (0.30, 0.55, 0.30)

# (color, ring?) per class; BG has no lesion
LESION_STYLE: dict[ClassLabel, tuple[tuple[float, float, float], bool]] = {
    ClassLabel.D: ((0.60, 0.05, 0.05), False),
    ClassLabel.N: ((0.98, 0.92, 0.85), False),
    ClassLabel.P: ((0.45, 0.15, 0.55), False),
    ClassLabel.S: ((0.10, 0.10, 0.10), True),
    ClassLabel.V: ((0.90, 0.80, 0.10), True),
}

NOISE_SIGMA: float = 0.03
COLOR_JITTER: float = 0.05


def _to_channels(rgb: NDArray[np.float32], channels: int) -> NDArray[np.float32]:
    if channels == 3:
        return rgb
    gray = rgb.mean(axis=-1, keepdims=True)
    if channels == 1:
        return gray
    return np.concatenate([rgb, np.ones_like(gray)], axis=-1)[..., :channels]


def wound_image(
    label: ClassLabel,
    shape: tuple[int, int, int],
    rng: np.random.Generator,
) -> NDArray[np.float32]:
    """Draw one synthetic wound-like image of class ``label``."""
    height, width, channels = shape
    scale = min(height, width) / 16.0
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)

    base = BACKDROP_RGB if label is ClassLabel.BG else SKIN_RGB
    base_rgb = np.asarray(base, dtype=np.float32) + rng.uniform(-COLOR_JITTER, COLOR_JITTER, 3)
    image = np.broadcast_to(base_rgb, (height, width, 3)).copy()

    if label in LESION_STYLE:
        color, ring = LESION_STYLE[label]
        cy = (height - 1) / 2 + rng.uniform(-3, 3) * scale
        cx = (width - 1) / 2 + rng.uniform(-3, 3) * scale
        radius = rng.uniform(3.5, 5.5) * scale
        dist = np.hypot(yy - cy, xx - cx)
        mask = np.abs(dist - radius) <= 1.2 * scale if ring else dist <= radius
        lesion_rgb = np.asarray(color, dtype=np.float32) + rng.uniform(
            -COLOR_JITTER, COLOR_JITTER, 3
        )
        image[mask] = lesion_rgb

    image += rng.normal(0.0, NOISE_SIGMA, image.shape)
    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    return _to_channels(image, channels)


def synthetic_dataset(
    per_class: int,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    seed: int = 0,
    catalog: Sequence[ClassLabel] = DEFAULT_CATALOG,
) -> LabeledDataset:
    """In-memory synthetic dataset with ``per_class`` images per class."""
    samples: list[ImageSample] = []
    for position, label in enumerate(catalog):
        rng = numpy_rng(seed, position)
        for i in range(per_class):
            pixels = wound_image(label, shape, rng)
            samples.append(
                ImageSample(
                    pixels=pixels,
                    label=label,
                    source_id=f"{label.value}/{label.value.lower()}_{i:03d}.png",
                    origin=Origin.REAL,
                )
            )
    return LabeledDataset(tuple(samples), shape, tuple(catalog))


def generate_synthetic_tree(
    root: Path | str,
    per_class: int | dict[ClassLabel, int],
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    seed: int = 0,
    catalog: Sequence[ClassLabel] = DEFAULT_CATALOG,
) -> Path:
    """Write a directory-per-class PNG tree suitable for ``ingest``.

    Args:
        root: Output directory; created if needed.
        per_class: Images per class, or a per-class count mapping.
        shape: Image shape (H, W, C).
        seed: Generation seed.
        catalog: Classes to create directories for.

    Returns:
        The root path.
    """
    root = Path(root)
    for position, label in enumerate(catalog):
        count = per_class[label] if isinstance(per_class, dict) else per_class
        class_dir = root / label.value
        class_dir.mkdir(parents=True, exist_ok=True)
        rng = numpy_rng(seed, position)
        for i in range(count):
            name = f"{label.value.lower()}_{i:03d}.png"
            save_png(wound_image(label, shape, rng), class_dir / name)
    logger.info("Generated synthetic tree at %s", root)
    return root


def toy_blob_dataset(
    n: int,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    seed: int = 0,
    label: ClassLabel = ClassLabel.D,
) -> LabeledDataset:
    """Single-class toy distribution: one soft red blob on a dark background."""
    height, width, channels = shape
    scale = min(height, width) / 16.0
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    rng = numpy_rng(seed)
    samples: list[ImageSample] = []
    for i in range(n):
        cy = (height - 1) / 2 + rng.uniform(-2, 2) * scale
        cx = (width - 1) / 2 + rng.uniform(-2, 2) * scale
        radius = rng.uniform(3.0, 4.5) * scale
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius**2))
        rgb = np.stack([0.9 * blob, 0.2 * blob, 0.15 * blob], axis=-1)
        pixels = _to_channels(np.clip(rgb, 0.0, 1.0).astype(np.float32), channels)
        samples.append(ImageSample(pixels, label, f"toy/{i:04d}", Origin.REAL))
    return LabeledDataset(tuple(samples), shape, (label,))


def constant_dataset(
    n: int,
    value: float,
    shape: tuple[int, int, int] = DEFAULT_SHAPE,
    label: ClassLabel = ClassLabel.D,
) -> LabeledDataset:
    """``n`` copies of one constant image."""
    pixels = np.full(shape, value, dtype=np.float32)
    samples = tuple(
        ImageSample(pixels.copy(), label, f"const/{i:04d}", Origin.REAL) for i in range(n)
    )
    return LabeledDataset(samples, shape, (label,))
