"""Tests for seeded geometric augmentation."""

from __future__ import annotations

import numpy as np
import pytest

from wound_augment.augment.geometric import (
    adjust_brightness,
    augment_dataset,
    augment_sample,
    epoch_policy,
    rotate,
    rotate_pixels,
)
from wound_augment.core.config import AugmentationPolicy, ClassLabel, FillMode, Origin
from wound_augment.core.exceptions import AugmentationError
from wound_augment.data.dataset import ImageSample, LabeledDataset
from wound_augment.data.synthetic import synthetic_dataset


def _sample(value: float = 0.5, shape: tuple[int, int, int] = (8, 8, 3)) -> ImageSample:
    return ImageSample(np.full(shape, value, dtype=np.float32), ClassLabel.S, "S/1")


class TestRotate:
    """Tests for rotation."""

    def test_zero_angle_identity(self):
        """A zero rotation returns the same pixels."""
        sample = synthetic_dataset(1).samples[0]
        np.testing.assert_array_equal(rotate(sample, 0.0).pixels, sample.pixels)

    def test_shape_and_label_preserved(self):
        """Rotation keeps shape, label and source id."""
        sample = synthetic_dataset(1).samples[3]
        out = rotate(sample, 25.0)
        assert out.pixels.shape == sample.pixels.shape
        assert out.label is sample.label
        assert out.source_id == sample.source_id
        assert out.origin is Origin.GEOMETRIC_AUG

    def test_constant_image_with_edge_fill(self):
        """Edge fill keeps a constant image constant."""
        out = rotate(_sample(0.4), 30.0, FillMode.NEAREST_EDGE)
        np.testing.assert_allclose(out.pixels, 0.4, atol=1e-6)

    def test_black_fill_darkens_corners(self):
        """Constant-black fill puts zeros in the rotated-out corners."""
        out = rotate_pixels(np.ones((16, 16, 1), dtype=np.float32), 45.0, FillMode.CONSTANT_BLACK)
        assert out[0, 0, 0] < 0.5
        assert out[8, 8, 0] == pytest.approx(1.0)

    def test_quarter_turn_is_index_permutation(self):
        """A 90 degree turn moves pixel (i, j) to (W-1-j, i), counter-clockwise."""
        pixels = np.random.default_rng(3).uniform(size=(16, 16, 3)).astype(np.float32)
        out = rotate_pixels(pixels, 90.0, FillMode.CONSTANT_BLACK)
        expected = np.empty_like(pixels)
        for i in range(16):
            for j in range(16):
                expected[15 - j, i] = pixels[i, j]
        assert float(np.abs(out - expected).mean()) < 1e-3

    @pytest.mark.parametrize("angle", [17.0, -30.0, 45.0])
    def test_rotate_back_interior(self, angle: float):
        """Rotating by an angle and back restores the interior of a smooth image."""
        yy, xx = np.mgrid[0:32, 0:32].astype(np.float32)
        smooth = 0.5 + 0.2 * np.sin(xx / 5.0) * np.cos(yy / 7.0)
        sample = ImageSample(np.repeat(smooth[:, :, None], 3, axis=2), ClassLabel.S, "S/2")
        back = rotate(rotate(sample, angle), -angle)
        interior = (slice(8, 24), slice(8, 24))
        assert float(np.abs(back.pixels[interior] - sample.pixels[interior]).mean()) < 0.02

    def test_angle_out_of_range(self):
        """Angles beyond 180 degrees are rejected."""
        with pytest.raises(AugmentationError):
            rotate(_sample(), 200.0)


class TestBrightness:
    """Tests for brightness shifts."""

    def test_adds_delta(self):
        """Every channel shifts by delta."""
        out = adjust_brightness(_sample(0.5), 0.2)
        np.testing.assert_allclose(out.pixels, 0.7, atol=1e-6)

    def test_clamps(self):
        """Results are clamped to [0, 1]."""
        assert adjust_brightness(_sample(0.9), 0.2).pixels.max() == pytest.approx(1.0)
        assert adjust_brightness(_sample(0.1), -0.2).pixels.min() == pytest.approx(0.0)

    def test_delta_out_of_range(self):
        """|delta| > 1 is rejected."""
        with pytest.raises(AugmentationError):
            adjust_brightness(_sample(), 1.5)


class TestAugmentDataset:
    """Tests for dataset-level augmentation."""

    def test_invariants_over_random_policies(self):
        """Cardinality, labels, range and determinism hold for random policies."""
        rng = np.random.default_rng(11)
        for trial in range(200):
            ds = synthetic_dataset(1, shape=(8, 8, 3), seed=trial)
            policy = AugmentationPolicy(
                rotation_max_deg=float(rng.uniform(0, 180)),
                brightness_max_delta=float(rng.uniform(0, 1)),
                fill_mode=FillMode.CONSTANT_BLACK if rng.random() < 0.5 else FillMode.NEAREST_EDGE,
                signed_brightness=bool(rng.random() < 0.5),
                compose_both=bool(rng.random() < 0.3),
                seed=int(rng.integers(0, 1000)),
            )
            out = augment_dataset(ds, policy)
            assert len(out) == len(ds)
            assert [s.label for s in out] == [s.label for s in ds]
            images = out.images()
            assert images.min() >= 0.0
            assert images.max() <= 1.0
            np.testing.assert_array_equal(images, augment_dataset(ds, policy).images())

    def test_zero_policy_is_identity(self, small_dataset: LabeledDataset):
        """No rotation and no brightness change leaves pixels unchanged."""
        policy = AugmentationPolicy(rotation_max_deg=0.0, brightness_max_delta=0.0, seed=3)
        out = augment_dataset(small_dataset, policy)
        np.testing.assert_allclose(out.images(), small_dataset.images(), atol=1e-6)

    def test_threaded_matches_serial(self, small_dataset: LabeledDataset):
        """Worker count does not change the output."""
        policy = AugmentationPolicy(seed=5)
        serial = augment_dataset(small_dataset, policy, max_workers=1).images()
        threaded = augment_dataset(small_dataset, policy, max_workers=4).images()
        np.testing.assert_array_equal(serial, threaded)

    def test_seed_changes_output(self, small_dataset: LabeledDataset):
        """Different seeds draw different transforms."""
        a = augment_dataset(small_dataset, AugmentationPolicy(seed=1)).images()
        b = augment_dataset(small_dataset, AugmentationPolicy(seed=2)).images()
        assert not np.array_equal(a, b)

    def test_brighten_only_by_default(self):
        """Unsigned policies never darken a flat image."""
        ds = LabeledDataset(tuple(_sample(0.5) for _ in range(20)), (8, 8, 3))
        policy = AugmentationPolicy(rotation_max_deg=10.0, seed=0)
        assert augment_dataset(ds, policy).images().min() >= 0.5 - 1e-6

    def test_concatenate_keeps_originals(self, small_dataset: LabeledDataset):
        """Concatenation doubles the set with distinct source ids."""
        out = augment_dataset(small_dataset, AugmentationPolicy(seed=0, concatenate=True))
        assert len(out) == 2 * len(small_dataset)
        assert out.samples[: len(small_dataset)] == small_dataset.samples
        assert len(set(out.source_ids())) == len(out)

    def test_empty_rejected(self):
        """Augmenting an empty dataset raises AugmentationError."""
        with pytest.raises(AugmentationError):
            augment_dataset(LabeledDataset((), (8, 8, 3)), AugmentationPolicy())

    def test_per_sample_stream(self, small_dataset: LabeledDataset):
        """Sample i depends only on (seed, i)."""
        policy = AugmentationPolicy(seed=9)
        full = augment_dataset(small_dataset, policy)
        single = augment_sample(small_dataset.samples[7], 7, policy)
        np.testing.assert_array_equal(full.samples[7].pixels, single.pixels)

    def test_epoch_policy_reseeds(self):
        """Each epoch gets its own derived seed."""
        base = AugmentationPolicy(seed=4)
        assert epoch_policy(base, 1).seed != epoch_policy(base, 2).seed
        assert epoch_policy(base, 1).seed == epoch_policy(base, 1).seed
        assert epoch_policy(base, 1).rotation_max_deg == base.rotation_max_deg
