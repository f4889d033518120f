"""Tests for the bundled synthetic dataset generator."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from wound_augment.core.config import DEFAULT_CATALOG, DEFAULT_SHAPE, ClassLabel
from wound_augment.data.dataset import content_hash, ingest
from wound_augment.data.synthetic import (
    constant_dataset,
    generate_synthetic_tree,
    synthetic_dataset,
    toy_blob_dataset,
)


class TestSyntheticDataset:
    """Tests for in-memory synthetic data."""

    def test_counts_and_shape(self):
        """Every class gets per_class images of the requested shape."""
        ds = synthetic_dataset(4, shape=(8, 8, 3), seed=0)
        assert len(ds) == 24
        assert ds.shape == (8, 8, 3)
        assert all(n == 4 for n in ds.class_counts.values())

    def test_deterministic(self):
        """The same seed gives the same pixels."""
        assert content_hash(synthetic_dataset(3, seed=2)) == content_hash(
            synthetic_dataset(3, seed=2)
        )
        assert content_hash(synthetic_dataset(3, seed=2)) != content_hash(
            synthetic_dataset(3, seed=3)
        )

    def test_classes_differ_in_color(self):
        """Class mean colors are distinct."""
        ds = synthetic_dataset(10, seed=0)
        means = [ds.subset(label).images().mean(axis=(0, 1, 2)) for label in DEFAULT_CATALOG]
        for i in range(len(means)):
            for j in range(i + 1, len(means)):
                assert np.abs(means[i] - means[j]).max() > 0.02

    def test_grayscale_channels(self):
        """Single-channel images are supported."""
        ds = synthetic_dataset(2, shape=(16, 16, 1))
        assert ds.images().shape == (12, 16, 16, 1)


class TestSyntheticTree:
    """Tests for the on-disk class tree."""

    def test_tree_is_ingestible(self, tmp_path: Path):
        """The written tree ingests with the same counts."""
        root = generate_synthetic_tree(tmp_path / "tree", per_class=3, seed=0)
        ds = ingest(root, DEFAULT_SHAPE)
        assert len(ds) == 18
        for label in DEFAULT_CATALOG:
            assert (root / label.value).is_dir()

    def test_per_class_mapping(self, tmp_path: Path):
        """Per-class counts can differ."""
        counts = {label: 2 for label in DEFAULT_CATALOG}
        counts[ClassLabel.D] = 5
        root = generate_synthetic_tree(tmp_path / "tree", per_class=counts)
        ds = ingest(root, DEFAULT_SHAPE)
        assert ds.class_counts[ClassLabel.D] == 5
        assert ds.class_counts[ClassLabel.BG] == 2


class TestToyDistributions:
    """Tests for the single-class toy sets used by GAN tests."""

    def test_toy_blob(self):
        """Toy blobs are single-class with a one-label catalog."""
        ds = toy_blob_dataset(5, shape=(8, 8, 3), seed=0)
        assert len(ds) == 5
        assert ds.catalog == (ClassLabel.D,)
        assert ds.images().max() <= 1.0

    def test_constant(self):
        """Constant images hold one value everywhere."""
        ds = constant_dataset(3, 0.25, shape=(4, 4, 3))
        np.testing.assert_array_equal(ds.images(), np.full((3, 4, 4, 3), 0.25, dtype=np.float32))
