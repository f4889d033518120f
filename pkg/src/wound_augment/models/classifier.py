"""Softmax classification head trained on frozen backbone features.

Head layout: fixed feature standardizer (fit on the training features),
optional hidden Linear+ReLU layers, and a zero-initialized output layer so an
untrained head predicts the uniform distribution. Training is plain
mini-batch SGD on cross-entropy at a constant learning rate, with early
stopping on the training loss.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from wound_augment.augment.geometric import augment_dataset, epoch_policy
from wound_augment.core.config import (
    AGGRESSIVE_LEARNING_RATE,
    EARLY_STOP_MIN_DELTA,
    AugmentationPolicy,
    ClassLabel,
    Condition,
    TrainConfig,
)
from wound_augment.core.exceptions import (
    BackboneError,
    EmptyDatasetError,
    ShapeMismatchError,
    TrainingDivergedError,
    TrainingError,
)
from wound_augment.core.seeding import derive_seed, torch_generator
from wound_augment.data.dataset import LabeledDataset
from wound_augment.eval.metrics import EvaluationReport, confusion
from wound_augment.models.backbone import FeatureExtractor, build_backbone, extract

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

HEAD_FILE = "head.pt"
MODEL_INFO_FILE = "model.json"


class ClassificationHead(nn.Module):
    """Standardize, optional hidden ReLU layers, then output logits."""

    def __init__(self, feature_dim: int, hidden: Sequence[int], num_classes: int) -> None:
        super().__init__()
        self.register_buffer("feature_mean", torch.zeros(feature_dim))
        self.register_buffer("feature_scale", torch.ones(feature_dim))
        layers: list[nn.Module] = []
        width = feature_dim
        for h in hidden:
            layers += [nn.Linear(width, h), nn.ReLU()]
            width = h
        self.hidden = nn.Sequential(*layers)
        self.output = nn.Linear(width, num_classes)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        x = (features - self.feature_mean) / self.feature_scale
        return self.output(self.hidden(x))

    def reset_parameters(self, seed: int) -> None:
        generator = torch_generator(seed)
        with torch.no_grad():
            for layer in self.hidden:
                if isinstance(layer, nn.Linear):
                    bound = 1.0 / math.sqrt(layer.in_features)
                    layer.weight.copy_(
                        (torch.rand(layer.weight.shape, generator=generator) * 2 - 1) * bound
                    )
                    layer.bias.zero_()
            self.output.weight.zero_()
            self.output.bias.zero_()

    def fit_standardizer(self, features: torch.Tensor) -> None:
        mean = features.mean(dim=0)
        scale = features.std(dim=0, unbiased=False)
        scale = torch.where(scale > 1e-6, scale, torch.ones_like(scale))
        self.feature_mean.copy_(mean)
        self.feature_scale.copy_(scale)


@dataclass
class TrainedModel:
    """A trained head together with the frozen extractor that feeds it."""

    config: TrainConfig
    head: ClassificationHead
    extractor: FeatureExtractor
    catalog: tuple[ClassLabel, ...]
    training_curve: list[tuple[float, float]] = field(default_factory=list)
    stopped_epoch: int = 0

    @property
    def head_parameters(self) -> dict[str, NDArray[np.float32]]:
        return {k: v.detach().cpu().numpy().copy() for k, v in self.head.state_dict().items()}

    @property
    def early_stopped(self) -> bool:
        return self.stopped_epoch < self.config.epochs

    @property
    def final_train_accuracy(self) -> float | None:
        return self.training_curve[-1][1] if self.training_curve else None

    def checksum(self) -> str:
        """SHA-256 of the head state (parameters and standardizer)."""
        digest = hashlib.sha256()
        for name, tensor in self.head.state_dict().items():
            digest.update(name.encode())
            digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
        return digest.hexdigest()


def cross_entropy_head_loss(
    head: ClassificationHead,
    features: torch.Tensor,
    targets: torch.Tensor,
) -> torch.Tensor:
    """Mean cross-entropy of the head's softmax over a feature batch."""
    return F.cross_entropy(head(features), targets)


def init_model(
    cfg: TrainConfig,
    catalog: Sequence[ClassLabel],
    extractor: FeatureExtractor | None = None,
) -> TrainedModel:
    """Untrained model: identity standardizer and zero output layer."""
    if cfg.num_classes != len(catalog):
        raise TrainingError(
            f"num_classes={cfg.num_classes} does not match the {len(catalog)}-class catalog"
        )
    extractor = extractor or build_backbone(cfg.backbone)
    head = ClassificationHead(extractor.feature_dim, cfg.head_hidden, cfg.num_classes)
    head.reset_parameters(derive_seed(cfg.seed, "head-init"))
    return TrainedModel(cfg, head, extractor, tuple(catalog))


def train(
    train_ds: LabeledDataset,
    cfg: TrainConfig,
    extractor: FeatureExtractor | None = None,
    features: NDArray[np.float32] | None = None,
    reaugment_policy: AugmentationPolicy | None = None,
) -> TrainedModel:
    """Train a classification head on frozen features of ``train_ds``.

    Args:
        train_ds: Training set; its catalog fixes the class order.
        cfg: Training configuration.
        extractor: Prebuilt extractor for ``cfg.backbone`` (built if omitted).
        features: Precomputed features of ``train_ds`` (extracted if omitted).
        reaugment_policy: Base policy when ``cfg.reaugment_each_epoch`` is set;
            ``train_ds`` is then the un-augmented set and every epoch trains on
            a freshly seeded augmentation of it.

    Returns:
        The trained model with its per-epoch (loss, accuracy) curve.

    Raises:
        EmptyDatasetError: If ``train_ds`` is empty.
        ShapeMismatchError: If the dataset shape differs from the backbone's.
        TrainingDivergedError: If the loss becomes non-finite.
    """
    if len(train_ds) == 0:
        raise EmptyDatasetError("training set is empty")
    if train_ds.shape != tuple(cfg.backbone.input_shape):
        raise ShapeMismatchError(tuple(cfg.backbone.input_shape), train_ds.shape, "training set")
    if cfg.reaugment_each_epoch and reaugment_policy is None:
        raise TrainingError("reaugment_each_epoch requires an augmentation policy")

    model = init_model(cfg, train_ds.catalog, extractor)
    fe = model.extractor
    backbone_before = fe.checksum()

    epoch_ds = train_ds
    if cfg.reaugment_each_epoch and reaugment_policy is not None:
        epoch_ds = augment_dataset(train_ds, epoch_policy(reaugment_policy, 0))
        features = extract(fe, epoch_ds.images())
    elif features is None:
        features = extract(fe, train_ds.images())
    x = torch.from_numpy(np.asarray(features, dtype=np.float32))
    y = torch.from_numpy(epoch_ds.label_indices())
    model.head.fit_standardizer(x)

    params = [p for p in model.head.parameters() if p.requires_grad]
    optimizer = torch.optim.SGD(params, lr=cfg.learning_rate)
    shuffle_gen = torch_generator(derive_seed(cfg.seed, "shuffle"))
    aggressive = cfg.learning_rate >= AGGRESSIVE_LEARNING_RATE

    best_loss = math.inf
    stale_epochs = 0
    model.head.train()
    for epoch in range(1, cfg.epochs + 1):
        if cfg.reaugment_each_epoch and epoch > 1 and reaugment_policy is not None:
            epoch_ds = augment_dataset(train_ds, epoch_policy(reaugment_policy, epoch - 1))
            x = torch.from_numpy(extract(fe, epoch_ds.images()))
            y = torch.from_numpy(epoch_ds.label_indices())
        if len(x) != len(y):
            raise TrainingError("feature and label counts differ", f"{len(x)} != {len(y)}")

        n = len(y)
        order = torch.randperm(n, generator=shuffle_gen)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            logits = model.head(x[idx])
            loss = F.cross_entropy(logits, y[idx])
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, cfg.learning_rate, aggressive)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total_loss += float(loss.item()) * len(idx)
            correct += int((logits.argmax(dim=1) == y[idx]).sum().item())

        epoch_loss = total_loss / n
        epoch_acc = correct / n
        model.training_curve.append((epoch_loss, epoch_acc))
        logger.debug("epoch %d: loss=%.4f acc=%.3f", epoch, epoch_loss, epoch_acc)

        if epoch_loss < best_loss - EARLY_STOP_MIN_DELTA:
            best_loss = epoch_loss
            stale_epochs = 0
        else:
            stale_epochs += 1
        if cfg.early_stop_patience is not None and stale_epochs >= cfg.early_stop_patience:
            logger.info("Early stop at epoch %d of %d (%s)", epoch, cfg.epochs, cfg.label())
            break

    model.head.eval()
    model.stopped_epoch = len(model.training_curve)
    if fe.checksum() != backbone_before:
        raise TrainingError("Backbone parameters changed during head training")

    if aggressive:
        logger.warning(
            "Learning rate %g is aggressive; expect unstable training", cfg.learning_rate
        )
    final_loss, final_acc = model.training_curve[-1]
    logger.info(
        "Trained %s: %d epochs, loss=%.4f, train acc=%.3f",
        cfg.label(),
        model.stopped_epoch,
        final_loss,
        final_acc,
    )
    return model


def predict_features(model: TrainedModel, features: NDArray[np.float32]) -> NDArray[np.float32]:
    with torch.no_grad():
        logits = model.head(torch.from_numpy(np.asarray(features, dtype=np.float32)))
        return F.softmax(logits, dim=1).numpy()


def predict(model: TrainedModel, batch: NDArray[np.float32]) -> NDArray[np.float32]:
    """Class probabilities (N x num_classes) for an (N, H, W, C) batch.

    Raises:
        ShapeMismatchError: If the batch shape does not match the backbone.
    """
    return predict_features(model, extract(model.extractor, batch))


def predict_labels(model: TrainedModel, batch: NDArray[np.float32]) -> list[ClassLabel]:
    probs = predict(model, batch)
    return [model.catalog[i] for i in probs.argmax(axis=1)]


def evaluate(
    model: TrainedModel,
    test_ds: LabeledDataset,
    condition: Condition | str = Condition.XFER_ONLY,
    train_ds: LabeledDataset | None = None,
    test_features: NDArray[np.float32] | None = None,
) -> EvaluationReport:
    """Evaluate on ``test_ds``; ``train_ds`` adds train accuracy for the overfitting gap."""
    if tuple(test_ds.catalog) != model.catalog:
        raise TrainingError("Test catalog differs from the model's catalog")
    if test_features is None:
        test_features = extract(model.extractor, test_ds.images())
    predicted = [model.catalog[i] for i in predict_features(model, test_features).argmax(axis=1)]
    true = [s.label for s in test_ds]
    cm = confusion(true, predicted, model.catalog)

    train_accuracy = model.final_train_accuracy
    if train_ds is not None and len(train_ds) > 0:
        train_pred = predict(model, train_ds.images()).argmax(axis=1)
        train_accuracy = float((train_pred == train_ds.label_indices()).mean())

    name = condition.value if isinstance(condition, Condition) else condition
    return EvaluationReport.from_matrix(name, cm, model.config.label(), train_accuracy)


# =============================================================================
# Persistence
# =============================================================================


def save_model(model: TrainedModel, out_dir: Path | str) -> Path:
    """Write ``head.pt`` and ``model.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.head.state_dict(), out / HEAD_FILE)
    info: dict[str, Any] = {
        "config": model.config.model_dump(mode="json"),
        "catalog": [label.value for label in model.catalog],
        "feature_dim": model.extractor.feature_dim,
        "training_curve": [list(point) for point in model.training_curve],
        "stopped_epoch": model.stopped_epoch,
        "head_checksum": model.checksum(),
        "backbone_checksum": model.extractor.checksum(),
    }
    (out / MODEL_INFO_FILE).write_text(json.dumps(info, indent=2))
    logger.info("Saved model to %s", out)
    return out


def load_model(model_dir: Path | str, extractor: FeatureExtractor | None = None) -> TrainedModel:
    """Rebuild a model written by ``save_model``.

    Raises:
        TrainingError: If files are missing or the head checksum differs.
        BackboneError: If the rebuilt backbone differs from the one trained with.
    """
    src = Path(model_dir)
    info_path = src / MODEL_INFO_FILE
    if not info_path.is_file() or not (src / HEAD_FILE).is_file():
        raise TrainingError(f"No saved model in {src}")
    info = json.loads(info_path.read_text())
    cfg = TrainConfig.model_validate(info["config"])
    catalog = tuple(ClassLabel(code) for code in info["catalog"])

    model = init_model(cfg, catalog, extractor)
    if model.extractor.checksum() != info["backbone_checksum"]:
        raise BackboneError(
            "Backbone differs from the one the head was trained with",
            f"expected checksum {info['backbone_checksum'][:12]}",
        )
    state = torch.load(src / HEAD_FILE, map_location="cpu", weights_only=True)
    model.head.load_state_dict(state)
    model.head.eval()
    model.training_curve = [(float(a), float(b)) for a, b in info["training_curve"]]
    model.stopped_epoch = int(info["stopped_epoch"])
    if model.checksum() != info["head_checksum"]:
        raise TrainingError(f"Head checksum mismatch in {src}")
    return model
