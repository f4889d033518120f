"""Pytest configuration and fixtures."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from wound_augment.core.config import (
    DEFAULT_SHAPE,
    BackboneSpec,
    ClassLabel,
    GanConfig,
    Origin,
    TrainConfig,
)
from wound_augment.data.dataset import ImageSample, LabeledDataset
from wound_augment.data.synthetic import generate_synthetic_tree, synthetic_dataset

SMALL_SHAPE: tuple[int, int, int] = (8, 8, 3)


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--run-slow", action="store_true", default=False, help="run slow tests")
    parser.addoption(
        "--run-integration",
        action="store_true",
        default=False,
        help="run tests needing pretrained backbone weights",
    )


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    skip_integration = pytest.mark.skip(reason="needs --run-integration")
    for item in items:
        if "slow" in item.keywords and not config.getoption("--run-slow"):
            item.add_marker(skip_slow)
        if "integration" in item.keywords and not config.getoption("--run-integration"):
            item.add_marker(skip_integration)


@pytest.fixture
def shape() -> tuple[int, int, int]:
    """Desk-scale image shape."""
    return DEFAULT_SHAPE


@pytest.fixture
def synthetic_tree(tmp_path: Path) -> Path:
    """Directory-per-class tree with 6 PNGs per class."""
    return generate_synthetic_tree(tmp_path / "wounds", per_class=6, seed=3)


@pytest.fixture
def small_dataset() -> LabeledDataset:
    """In-memory six-class dataset, 10 images per class, 16x16x3."""
    return synthetic_dataset(10, seed=1)


@pytest.fixture
def separable_dataset() -> LabeledDataset:
    """Larger synthetic set for convergence tests, 20 images per class."""
    return synthetic_dataset(20, seed=0)


@pytest.fixture
def imbalanced_dataset() -> LabeledDataset:
    """Class counts BG=12, D=3, N=8, P=5, S=9, V=2."""
    counts = {
        ClassLabel.BG: 12,
        ClassLabel.D: 3,
        ClassLabel.N: 8,
        ClassLabel.P: 5,
        ClassLabel.S: 9,
        ClassLabel.V: 2,
    }
    rng = np.random.default_rng(7)
    samples = [
        ImageSample(
            pixels=rng.uniform(0.0, 1.0, DEFAULT_SHAPE).astype(np.float32),
            label=label,
            source_id=f"{label.value}/{i:03d}.png",
            origin=Origin.REAL,
        )
        for label, n in counts.items()
        for i in range(n)
    ]
    return LabeledDataset(tuple(samples), DEFAULT_SHAPE)


@pytest.fixture
def tiny_backbone() -> BackboneSpec:
    """Seeded tiny-cnn for 16x16x3 inputs."""
    return BackboneSpec(input_shape=DEFAULT_SHAPE, init_seed=0)


@pytest.fixture
def train_config(tiny_backbone: BackboneSpec) -> TrainConfig:
    """Short head-training run that converges on the synthetic data."""
    return TrainConfig(
        backbone=tiny_backbone,
        epochs=30,
        learning_rate=0.05,
        batch_size=16,
        seed=0,
        early_stop_patience=None,
    )


@pytest.fixture
def small_gan_config() -> GanConfig:
    """DE-GAN small enough for per-test training on 8x8 images."""
    return GanConfig(
        image_shape=SMALL_SHAPE,
        latent_dim=4,
        base_channels=4,
        epochs=3,
        batch_size=8,
        seed=0,
    )
