"""Datasets, manifests and the bundled synthetic generator."""

from wound_augment.data.dataset import (
    ImageSample,
    LabeledDataset,
    balance,
    content_hash,
    ingest,
    merge,
    split,
)
from wound_augment.data.manifest import read_manifest, read_split, write_manifest
from wound_augment.data.synthetic import generate_synthetic_tree, synthetic_dataset

__all__ = [
    "ImageSample",
    "LabeledDataset",
    "balance",
    "content_hash",
    "ingest",
    "merge",
    "split",
    "read_manifest",
    "read_split",
    "write_manifest",
    "generate_synthetic_tree",
    "synthetic_dataset",
]
