"""Labeled image datasets: ingest, balance, split and merge."""

from __future__ import annotations

import hashlib
import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from PIL import Image, UnidentifiedImageError

from wound_augment.core.config import (
    DEFAULT_CATALOG,
    IMAGE_EXTENSIONS,
    ClassLabel,
    Origin,
    SplitSpec,
)
from wound_augment.core.exceptions import (
    DatasetError,
    EmptyDatasetError,
    MissingClassDirectoryError,
    ShapeMismatchError,
    UnderpopulatedClassError,
)
from wound_augment.core.seeding import numpy_rng

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

PIL_MODES: dict[int, str] = {1: "L", 3: "RGB", 4: "RGBA"}


@dataclass(frozen=True, eq=False)
class ImageSample:
    """One image with its label and provenance."""

    pixels: NDArray[np.float32]
    label: ClassLabel
    source_id: str
    origin: Origin = Origin.REAL

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3:
            raise DatasetError(
                f"Pixels of {self.source_id} must be H x W x C, got {self.pixels.shape}"
            )
        if self.pixels.size and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise DatasetError(f"Pixels of {self.source_id} outside [0, 1]")

    @property
    def shape(self) -> tuple[int, int, int]:
        height, width, channels = self.pixels.shape
        return (height, width, channels)

    def derive(
        self,
        pixels: NDArray[np.float32],
        origin: Origin,
        source_id: str | None = None,
    ) -> ImageSample:
        """Copy with new pixels and provenance, keeping the label."""
        return replace(
            self,
            pixels=pixels.astype(np.float32, copy=False),
            origin=origin,
            source_id=source_id or self.source_id,
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Ordered samples sharing one declared shape and a class catalog."""

    samples: tuple[ImageSample, ...]
    shape: tuple[int, int, int]
    catalog: tuple[ClassLabel, ...] = DEFAULT_CATALOG
    _index: dict[ClassLabel, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "shape", tuple(self.shape))
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "_index", {label: i for i, label in enumerate(self.catalog)})
        for sample in self.samples:
            if sample.shape != self.shape:
                raise ShapeMismatchError(self.shape, sample.shape, sample.source_id)
            if sample.label not in self._index:
                raise DatasetError(
                    f"Label {sample.label.value} of {sample.source_id} not in catalog"
                )

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[ImageSample]:
        return iter(self.samples)

    @property
    def class_counts(self) -> dict[ClassLabel, int]:
        """Histogram of sample labels over the full catalog."""
        counts = dict.fromkeys(self.catalog, 0)
        for sample in self.samples:
            counts[sample.label] += 1
        return counts

    @property
    def num_classes(self) -> int:
        return len(self.catalog)

    def class_index(self, label: ClassLabel) -> int:
        """Position of ``label`` in the catalog."""
        return self._index[label]

    def images(self) -> NDArray[np.float32]:
        """All pixels stacked as an (N, H, W, C) array."""
        if not self.samples:
            return np.zeros((0, *self.shape), dtype=np.float32)
        return np.stack([s.pixels for s in self.samples]).astype(np.float32, copy=False)

    def label_indices(self) -> NDArray[np.int64]:
        """Catalog index of every sample label."""
        return np.array([self._index[s.label] for s in self.samples], dtype=np.int64)

    def source_ids(self) -> list[str]:
        return [s.source_id for s in self.samples]

    def with_samples(self, samples: Sequence[ImageSample]) -> LabeledDataset:
        """Dataset with the same shape and catalog but different samples."""
        return LabeledDataset(tuple(samples), self.shape, self.catalog)

    def subset(self, label: ClassLabel) -> LabeledDataset:
        """Samples of a single class, order preserved."""
        return self.with_samples([s for s in self.samples if s.label == label])

    def empty(self) -> LabeledDataset:
        return self.with_samples(())


# =============================================================================
# Ingest
# =============================================================================


def load_image(path: Path, shape: tuple[int, int, int]) -> NDArray[np.float32]:
    """Decode an image file and resize it to ``shape`` with values in [0, 1]."""
    height, width, channels = shape
    mode = PIL_MODES.get(channels)
    if mode is None:
        raise DatasetError(f"Unsupported channel count: {channels}")
    with Image.open(path) as img:
        converted = img.convert(mode)
        if converted.size != (width, height):
            converted = converted.resize((width, height), Image.BILINEAR)
        array = np.asarray(converted, dtype=np.float32) / 255.0
    if array.ndim == 2:
        array = array[:, :, np.newaxis]
    return np.clip(array, 0.0, 1.0)


def _decode(
    item: tuple[Path, str, ClassLabel],
    shape: tuple[int, int, int],
) -> ImageSample | None:
    path, source_id, label = item
    try:
        pixels = load_image(path, shape)
    except (OSError, UnidentifiedImageError, ValueError) as e:
        logger.warning("Skipping undecodable image %s: %s", source_id, e)
        return None
    return ImageSample(pixels=pixels, label=label, source_id=source_id, origin=Origin.REAL)


def ingest(
    root_path: Path | str,
    shape: tuple[int, int, int],
    catalog: Sequence[ClassLabel] = DEFAULT_CATALOG,
    max_workers: int | None = None,
) -> LabeledDataset:
    """Load a directory-per-class image tree.

    Args:
        root_path: Directory containing one subdirectory per class code.
        shape: Declared (H, W, C); every image is resized to it.
        catalog: Classes expected under the root.
        max_workers: Decoder threads (None lets the executor decide).

    Returns:
        Dataset ordered lexicographically by path relative to the root.

    Raises:
        MissingClassDirectoryError: If any class directory is absent.
        EmptyDatasetError: If no image could be decoded.
    """
    root = Path(root_path)
    missing = [label.value for label in catalog if not (root / label.value).is_dir()]
    if missing:
        raise MissingClassDirectoryError(missing, f"under {root}")

    items: list[tuple[Path, str, ClassLabel]] = []
    for label in catalog:
        for path in (root / label.value).iterdir():
            if path.is_file() and path.suffix.lower() in IMAGE_EXTENSIONS:
                items.append((path, path.relative_to(root).as_posix(), label))
    items.sort(key=lambda item: item[1])

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        decoded = list(pool.map(lambda item: _decode(item, shape), items))
    samples = [s for s in decoded if s is not None]

    if not samples:
        raise EmptyDatasetError(f"no decodable images under {root}")

    dataset = LabeledDataset(tuple(samples), shape, tuple(catalog))
    logger.info(
        "Ingested %d images from %s (%d skipped)",
        len(samples),
        root,
        len(items) - len(samples),
    )
    return dataset


# =============================================================================
# Balance / Split / Merge
# =============================================================================


def balance(
    ds: LabeledDataset,
    per_class: int,
    seed: int,
    strict: bool = False,
) -> LabeledDataset:
    """Subsample every class to at most ``per_class`` samples.

    Each class is drawn uniformly without replacement from its own seeded
    stream. Selected samples keep their original relative order.

    Raises:
        DatasetError: If ``per_class`` < 1.
        UnderpopulatedClassError: In strict mode, for a class below ``per_class``.
    """
    if per_class < 1:
        raise DatasetError(f"per_class must be >= 1, got {per_class}")

    by_class = _indices_by_class(ds)
    keep: list[int] = []
    for position, label in enumerate(ds.catalog):
        indices = by_class[label]
        if strict and len(indices) < per_class:
            raise UnderpopulatedClassError(label.value, len(indices), per_class)
        k = min(per_class, len(indices))
        rng = numpy_rng(seed, position)
        chosen = rng.choice(len(indices), size=k, replace=False)
        keep.extend(indices[i] for i in chosen)

    keep.sort()
    logger.debug("Balanced %d -> %d samples (per_class=%d)", len(ds), len(keep), per_class)
    return ds.with_samples([ds.samples[i] for i in keep])


def stratified_train_count(count: int, train_fraction: float) -> int:
    """Round-half-up train share of ``count``, leaving both sides non-empty."""
    n_train = math.floor(train_fraction * count + 0.5)
    return min(max(n_train, 1), count - 1)


def split(ds: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset]:
    """Deterministic train/test partition.

    Stratified mode puts ``round(train_fraction * count)`` of every class in
    train. Classes with no samples are ignored.

    Raises:
        EmptyDatasetError: If the dataset is empty.
        UnderpopulatedClassError: Stratified mode with a one-sample class.
    """
    if len(ds) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")

    train_idx: list[int] = []
    if spec.stratified:
        by_class = _indices_by_class(ds)
        for position, label in enumerate(ds.catalog):
            indices = by_class[label]
            if not indices:
                continue
            if len(indices) < 2:
                raise UnderpopulatedClassError(label.value, len(indices), 2)
            n_train = stratified_train_count(len(indices), spec.train_fraction)
            perm = numpy_rng(spec.seed, position).permutation(len(indices))
            train_idx.extend(indices[i] for i in perm[:n_train])
    else:
        total = len(ds)
        if total < 2:
            raise UnderpopulatedClassError("*", total, 2)
        n_train = stratified_train_count(total, spec.train_fraction)
        perm = numpy_rng(spec.seed).permutation(total)
        train_idx.extend(int(i) for i in perm[:n_train])

    train_set = set(train_idx)
    train = ds.with_samples([s for i, s in enumerate(ds.samples) if i in train_set])
    test = ds.with_samples([s for i, s in enumerate(ds.samples) if i not in train_set])
    logger.info("Split %d samples -> %d train / %d test", len(ds), len(train), len(test))
    return train, test


def merge(ds_a: LabeledDataset, ds_b: LabeledDataset) -> LabeledDataset:
    """Concatenate two datasets, ``ds_a`` first.

    Raises:
        ShapeMismatchError: If the declared shapes differ.
    """
    if ds_a.shape != ds_b.shape:
        raise ShapeMismatchError(ds_a.shape, ds_b.shape, "cannot merge datasets")
    catalog = list(ds_a.catalog)
    catalog.extend(label for label in ds_b.catalog if label not in catalog)
    return LabeledDataset(ds_a.samples + ds_b.samples, ds_a.shape, tuple(catalog))


def content_hash(ds: LabeledDataset) -> str:
    """SHA-256 over sample identities, labels, provenance and pixels."""
    digest = hashlib.sha256()
    digest.update(repr(ds.shape).encode())
    for sample in ds.samples:
        digest.update(sample.source_id.encode("utf-8"))
        digest.update(sample.label.value.encode())
        digest.update(sample.origin.value.encode())
        digest.update(np.ascontiguousarray(sample.pixels, dtype=np.float32).tobytes())
    return digest.hexdigest()


def _indices_by_class(ds: LabeledDataset) -> dict[ClassLabel, list[int]]:
    by_class: dict[ClassLabel, list[int]] = {label: [] for label in ds.catalog}
    for i, sample in enumerate(ds.samples):
        by_class[sample.label].append(i)
    return by_class
