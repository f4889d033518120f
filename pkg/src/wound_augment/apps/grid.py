"""Hyperparameter grid runner for head-only transfer learning.

Every grid point trains one seeded head on frozen features and evaluates it
on the test split. Features are extracted once per backbone and shared by all
points using it. A failing point is recorded and the grid continues.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

from wound_augment.core.config import Condition, GridSpec, TrainConfig
from wound_augment.core.exceptions import TrainingError
from wound_augment.data.dataset import LabeledDataset, content_hash
from wound_augment.eval.metrics import EvaluationReport
from wound_augment.io.results import ResultsIndex, RunRecord, make_run_id
from wound_augment.models.backbone import FeatureExtractor, build_backbone, extract
from wound_augment.models.classifier import evaluate, save_model, train

if TYPE_CHECKING:
    import numpy as np
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

GRID_STAGE = "grid"


@dataclass
class GridPointResult:
    """Outcome of one grid point."""

    config: TrainConfig
    success: bool
    order: int = 0
    run_id: str = ""
    report: EvaluationReport | None = None
    stopped_epoch: int | None = None
    duration_seconds: float | None = None
    error: str | None = None

    @property
    def accuracy(self) -> float:
        return self.report.accuracy if self.report is not None else float("nan")

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "config": self.config.label(),
            "success": self.success,
            "accuracy": None if self.report is None else self.report.accuracy,
            "stopped_epoch": self.stopped_epoch,
            "duration_seconds": self.duration_seconds,
            "error": self.error,
        }

    def to_record(self, condition: str, dataset_hash: str | None) -> RunRecord:
        return RunRecord(
            run_id=self.run_id,
            stage=GRID_STAGE,
            condition=condition,
            config_label=self.config.label(),
            config=self.config.model_dump(mode="json"),
            success=self.success,
            error=self.error,
            report=None if self.report is None else self.report.to_dict(),
            stopped_epoch=self.stopped_epoch,
            duration_seconds=self.duration_seconds,
            dataset_hash=dataset_hash,
        )

    @classmethod
    def from_record(cls, record: RunRecord, order: int) -> GridPointResult:
        return cls(
            config=TrainConfig.model_validate(record.config),
            success=record.success,
            order=order,
            run_id=record.run_id,
            report=None if record.report is None else EvaluationReport.from_dict(record.report),
            stopped_epoch=record.stopped_epoch,
            duration_seconds=record.duration_seconds,
            error=record.error,
        )


@dataclass
class _BackboneFeatures:
    extractor: FeatureExtractor | None
    train: NDArray[np.float32] | None
    test: NDArray[np.float32] | None
    error: str | None = None


def _prepare_backbones(
    configs: Sequence[TrainConfig],
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
) -> dict[str, _BackboneFeatures]:
    prepared: dict[str, _BackboneFeatures] = {}
    for cfg in configs:
        key = cfg.backbone.model_dump_json()
        if key in prepared:
            continue
        try:
            fe = build_backbone(cfg.backbone)
            prepared[key] = _BackboneFeatures(
                fe, extract(fe, train_ds.images()), extract(fe, test_ds.images())
            )
        except Exception as e:
            logger.error("Backbone %s unavailable: %s", cfg.backbone.name.value, e)
            prepared[key] = _BackboneFeatures(None, None, None, error=str(e))
    return prepared


def run_point(
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    cfg: TrainConfig,
    order: int = 0,
    run_id: str = "",
    condition: Condition | str = Condition.XFER_ONLY,
    features: _BackboneFeatures | None = None,
    model_dir: Path | None = None,
) -> GridPointResult:
    """Train and evaluate one configuration, capturing any failure."""
    start = time.monotonic()
    try:
        if features is not None and features.error is not None:
            raise TrainingError("Backbone unavailable", features.error)
        model = train(
            train_ds,
            cfg,
            extractor=None if features is None else features.extractor,
            features=None if features is None else features.train,
        )
        report = evaluate(
            model,
            test_ds,
            condition,
            test_features=None if features is None else features.test,
        )
        if model_dir is not None:
            save_model(model, model_dir)
        return GridPointResult(
            config=cfg,
            success=True,
            order=order,
            run_id=run_id,
            report=report,
            stopped_epoch=model.stopped_epoch,
            duration_seconds=time.monotonic() - start,
        )
    except Exception as e:
        logger.warning("Grid point %s failed: %s", cfg.label(), e)
        return GridPointResult(
            config=cfg,
            success=False,
            order=order,
            run_id=run_id,
            duration_seconds=time.monotonic() - start,
            error=str(e),
        )


def run_grid(
    train_ds: LabeledDataset,
    test_ds: LabeledDataset,
    grid: GridSpec | Sequence[TrainConfig],
    max_workers: int = 1,
    run_dir: Path | str | None = None,
    index: ResultsIndex | None = None,
    seed: int = 0,
    condition: Condition | str = Condition.XFER_ONLY,
) -> list[GridPointResult]:
    """Run every grid point and return results sorted by test accuracy.

    Args:
        train_ds: Training split.
        test_ds: Test split.
        grid: Grid spec (expanded with ``seed``) or explicit configurations.
        max_workers: Concurrent grid points.
        run_dir: Directory for per-point model checkpoints.
        index: Results index; completed points found there are not rerun.
        seed: Training seed for every point of a ``GridSpec``.
        condition: Condition name stored in reports.

    Returns:
        Successful results by descending accuracy (grid order breaks ties),
        followed by failed points in grid order.
    """
    configs = (
        grid.configs(train_ds.num_classes, seed) if isinstance(grid, GridSpec) else list(grid)
    )
    if not configs:
        raise TrainingError("Grid is empty")
    condition_name = condition.value if isinstance(condition, Condition) else condition
    dataset_hash = f"{content_hash(train_ds)}:{content_hash(test_ds)}"
    run_ids = [
        make_run_id(dataset_hash, condition_name, cfg.model_dump_json()) for cfg in configs
    ]

    results: dict[int, GridPointResult] = {}
    pending: list[int] = []
    for i, run_id in enumerate(run_ids):
        done = index.completed(run_id) if index is not None else None
        if done is not None:
            results[i] = GridPointResult.from_record(done, i)
        else:
            pending.append(i)
    if len(pending) < len(configs):
        logger.info("Reusing %d completed grid points", len(configs) - len(pending))

    prepared = _prepare_backbones([configs[i] for i in pending], train_ds, test_ds)
    out_dir = Path(run_dir) if run_dir is not None else None

    def job(i: int) -> GridPointResult:
        cfg = configs[i]
        result = run_point(
            train_ds,
            test_ds,
            cfg,
            order=i,
            run_id=run_ids[i],
            condition=condition_name,
            features=prepared[cfg.backbone.model_dump_json()],
            model_dir=None if out_dir is None else out_dir / f"{i:03d}-{cfg.label()}",
        )
        if index is not None:
            index.append(result.to_record(condition_name, dataset_hash))
        return result

    if max_workers > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for i, result in zip(pending, pool.map(job, pending), strict=True):
                results[i] = result
    else:
        for i in pending:
            results[i] = job(i)

    ordered = [results[i] for i in range(len(configs))]
    succeeded = sorted((r for r in ordered if r.success), key=lambda r: -r.accuracy)
    failed = [r for r in ordered if not r.success]
    logger.info(
        "Grid finished: %d points, %d failed%s",
        len(ordered),
        len(failed),
        (
            f", best {succeeded[0].config.label()} acc={succeeded[0].accuracy:.3f}"
            if succeeded
            else ""
        ),
    )
    return succeeded + failed


def select_best(results: Iterable[GridPointResult]) -> GridPointResult:
    """Most accurate successful point; earlier grid order wins ties.

    Raises:
        TrainingError: If no grid point succeeded.
    """
    succeeded = [r for r in results if r.success]
    if not succeeded:
        raise TrainingError("No grid point trained successfully")
    return min(succeeded, key=lambda r: (-r.accuracy, r.order))


def grid_series(records: Iterable[RunRecord]) -> dict[str, list[tuple[float, float]]]:
    """(learning rate, accuracy) points per ``<backbone>-e<epochs>`` series."""
    series: dict[str, list[tuple[float, float]]] = {}
    for record in records:
        if not record.success or record.accuracy is None:
            continue
        cfg = record.config
        name = f"{cfg['backbone']['name']}-e{cfg['epochs']}"
        series.setdefault(name, []).append((float(cfg["learning_rate"]), record.accuracy))
    return {name: sorted(points) for name, points in series.items()}
