"""Frozen feature extractors for transfer learning.

``tiny-cnn`` is a small randomly initialized (seeded) convolutional stack for
desk-scale runs. The three ``*-adapter`` backbones wrap torchvision
ImageNet models whose weights are loaded from local files.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from pathlib import Path
from typing import TYPE_CHECKING, Callable

import numpy as np
import torch
from torch import nn

from wound_augment.core.config import WEIGHTS_DIR_ENV, BackboneName, BackboneSpec
from wound_augment.core.exceptions import (
    BackboneError,
    ShapeMismatchError,
    WeightsChecksumError,
    WeightsNotFoundError,
)
from wound_augment.core.seeding import torch_generator

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

IMAGENET_MEAN: tuple[float, float, float] = (0.485, 0.456, 0.406)
IMAGENET_STD: tuple[float, float, float] = (0.229, 0.224, 0.225)
EXTRACT_CHUNK: int = 256


class TinyCNN(nn.Module):
    """Three conv blocks followed by global average pooling."""

    def __init__(self, in_channels: int, feature_dim: int) -> None:
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(in_channels, 16, kernel_size=3, padding=1),
            nn.BatchNorm2d(16),
            nn.ReLU(),
            nn.MaxPool2d(2, ceil_mode=True),
            nn.Conv2d(16, 32, kernel_size=3, padding=1),
            nn.BatchNorm2d(32),
            nn.ReLU(),
            nn.MaxPool2d(2, ceil_mode=True),
            nn.Conv2d(32, feature_dim, kernel_size=3, padding=1),
            nn.BatchNorm2d(feature_dim),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)

    def reset_parameters(self, seed: int) -> None:
        """He-normal conv weights drawn from a private generator."""
        generator = torch_generator(seed)
        with torch.no_grad():
            for module in self.modules():
                if isinstance(module, nn.Conv2d):
                    fan_in = module.in_channels * module.kernel_size[0] * module.kernel_size[1]
                    std = math.sqrt(2.0 / fan_in)
                    module.weight.copy_(
                        torch.randn(module.weight.shape, generator=generator) * std
                    )
                    if module.bias is not None:
                        module.bias.zero_()
                elif isinstance(module, nn.BatchNorm2d):
                    module.reset_parameters()


class FeatureExtractor:
    """Immutable mapping from an (N, H, W, C) image batch to (N, feature_dim).

    Always runs in inference mode, so normalization layers use their stored
    statistics and results are per-sample.
    """

    def __init__(
        self,
        spec: BackboneSpec,
        module: nn.Module,
        feature_dim: int,
        preprocess: Callable[[torch.Tensor], torch.Tensor] | None = None,
    ) -> None:
        self.spec = spec
        self.module = module.eval()
        self.feature_dim = feature_dim
        self._preprocess = preprocess
        if spec.frozen:
            for param in self.module.parameters():
                param.requires_grad_(False)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        height, width, channels = self.spec.input_shape
        return (height, width, channels)

    @property
    def parameters_frozen(self) -> bool:
        return all(not p.requires_grad for p in self.module.parameters())

    def checksum(self) -> str:
        """SHA-256 over every parameter and buffer, in state-dict order."""
        digest = hashlib.sha256()
        for name, tensor in self.module.state_dict().items():
            digest.update(name.encode())
            digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()

    def __call__(self, batch: NDArray[np.float32]) -> NDArray[np.float32]:
        return extract(self, batch)

    def forward_tensor(self, nhwc: torch.Tensor) -> torch.Tensor:
        """Features for an NHWC float tensor (no shape checks)."""
        x = nhwc.permute(0, 3, 1, 2).contiguous()
        if self._preprocess is not None:
            x = self._preprocess(x)
        return self.module(x)


def extract(fe: FeatureExtractor, batch: NDArray[np.float32]) -> NDArray[np.float32]:
    """Run the frozen extractor over a batch.

    Raises:
        ShapeMismatchError: If the batch is not (N, H, W, C) of the declared shape.
    """
    array = np.asarray(batch, dtype=np.float32)
    if array.ndim != 4 or tuple(array.shape[1:]) != fe.input_shape:
        raise ShapeMismatchError(fe.input_shape, tuple(array.shape[1:]), "feature extraction")
    if len(array) == 0:
        return np.zeros((0, fe.feature_dim), dtype=np.float32)

    outputs: list[NDArray[np.float32]] = []
    with torch.no_grad():
        for start in range(0, len(array), EXTRACT_CHUNK):
            chunk = torch.from_numpy(array[start : start + EXTRACT_CHUNK])
            outputs.append(fe.forward_tensor(chunk).numpy().astype(np.float32))
    return np.concatenate(outputs, axis=0)


# =============================================================================
# Construction
# =============================================================================


def build_backbone(spec: BackboneSpec) -> FeatureExtractor:
    """Build a feature extractor for ``spec``.

    Raises:
        WeightsNotFoundError: Adapter weights cannot be located.
        WeightsChecksumError: Weight file fails its sha256 check.
        BackboneError: Output width disagrees with ``spec.feature_dim``.
    """
    if spec.name is BackboneName.TINY_CNN:
        feature_dim = spec.resolved_feature_dim
        tiny = TinyCNN(spec.input_shape[2], feature_dim)
        tiny.reset_parameters(spec.init_seed)
        logger.debug("Built tiny-cnn (feature_dim=%d, init_seed=%d)", feature_dim, spec.init_seed)
        return FeatureExtractor(spec, tiny, feature_dim)

    if spec.input_shape[2] != 3:
        raise ShapeMismatchError(
            (spec.input_shape[0], spec.input_shape[1], 3),
            spec.input_shape,
            f"{spec.name.value} expects RGB input",
        )
    module = _build_adapter(spec)
    mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
    std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
    fe = FeatureExtractor(spec, module, 0, preprocess=lambda x: (x - mean) / std)

    height, width, channels = spec.input_shape
    with torch.no_grad():
        width_out = int(fe.forward_tensor(torch.zeros(1, height, width, channels)).shape[1])
    if spec.feature_dim is not None and spec.feature_dim != width_out:
        raise BackboneError(
            f"{spec.name.value} produces {width_out} features",
            f"config declares feature_dim={spec.feature_dim}",
        )
    fe.feature_dim = width_out
    logger.info("Loaded %s (feature_dim=%d)", spec.name.value, width_out)
    return fe


def locate_weights(spec: BackboneSpec) -> Path:
    """Find the weight file for an adapter and verify its checksum."""
    candidates: list[Path] = []
    if spec.weights_path:
        candidates.append(Path(spec.weights_path))
    env_dir = os.environ.get(WEIGHTS_DIR_ENV)
    if env_dir:
        candidates.append(Path(env_dir) / f"{spec.name.value}.pth")
    for path in candidates:
        if path.is_file():
            if spec.weights_sha256:
                actual = _sha256_file(path)
                if actual != spec.weights_sha256.lower():
                    raise WeightsChecksumError(str(path), spec.weights_sha256, actual)
            return path
    raise WeightsNotFoundError(spec.name.value, [str(p) for p in candidates])


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _build_adapter(spec: BackboneSpec) -> nn.Module:
    path = locate_weights(spec)
    try:
        from torchvision import models
    except ImportError as e:
        raise BackboneError(
            "torchvision is required for pretrained adapters",
            "install with: pip install 'wound-augment[pretrained]'",
        ) from e

    state = torch.load(path, map_location="cpu", weights_only=True)
    if spec.name is BackboneName.RESNET50:
        resnet = models.resnet50(weights=None)
        resnet.load_state_dict(state)
        resnet.fc = nn.Identity()
        return resnet
    if spec.name is BackboneName.MOBILENETV2:
        mobilenet = models.mobilenet_v2(weights=None)
        mobilenet.load_state_dict(state)
        return nn.Sequential(mobilenet.features, nn.AdaptiveAvgPool2d(1), nn.Flatten())
    if spec.name is BackboneName.VGG16:
        vgg = models.vgg16(weights=None)
        vgg.load_state_dict(state)
        return nn.Sequential(vgg.features, nn.AdaptiveAvgPool2d(1), nn.Flatten())
    raise BackboneError(f"Unknown backbone {spec.name.value}")
