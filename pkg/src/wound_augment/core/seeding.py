"""Labeled random substreams derived from one global seed.

Every stage of an experiment draws from its own stream, named by a label
path such as ``("grid", "tiny-cnn-e30-lr0.001")``. The stage seed is the
first 63 bits of ``sha256("<global_seed>/<label>/<label>...")``, so adding
or reordering stages never shifts the randomness of another stage.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch

SEED_MASK: int = (1 << 63) - 1


def derive_seed(global_seed: int, *labels: str | int) -> int:
    """Derive a stage seed from the global seed and a label path.

    Args:
        global_seed: Experiment-wide seed.
        *labels: Stage names, outermost first.

    Returns:
        Non-negative 63-bit integer seed.
    """
    key = "/".join([str(global_seed), *(str(label) for label in labels)])
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()
    return int(digest[:16], 16) & SEED_MASK


def numpy_rng(seed: int, *stream: int) -> np.random.Generator:
    """NumPy generator for ``seed``, optionally split by integer stream keys."""
    return np.random.default_rng([seed & SEED_MASK, *stream])


def torch_generator(seed: int) -> torch.Generator:
    """CPU torch generator seeded with ``seed``."""
    generator = torch.Generator(device="cpu")
    generator.manual_seed(seed & SEED_MASK)
    return generator
