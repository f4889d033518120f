"""Full experiment orchestration: data, transfer-learning grid, augmented retrains.

Stages, in order:

1. Load the dataset (ingest a class tree, or generate the synthetic one).
2. Balance by selective sampling, then a stratified train/test split. The
   split is written once as a manifest keyed by its content hash and every
   condition trains against it and evaluates on the same test set.
3. ``xfer-only``: run the hyperparameter grid and keep the most accurate
   configuration.
4. ``geometric-aug`` / ``degan-aug`` / ``combined-aug``: retrain that
   configuration on the augmented training set.
5. Compare all conditions, write metric summaries and render figures.

Each stage draws its seed from ``global_seed`` via ``derive_seed`` so one
number pins down the whole experiment.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from wound_augment.apps.grid import GridPointResult, grid_series, run_grid, select_best
from wound_augment.augment.geometric import augment_dataset
from wound_augment.core.config import (
    AGGRESSIVE_LEARNING_RATE,
    DEFAULT_CATALOG,
    BackboneSpec,
    Condition,
    ConditionSpec,
    ExperimentConfig,
    GanConfig,
    Severity,
    TrainConfig,
)
from wound_augment.core.exceptions import WoundAugError
from wound_augment.core.seeding import derive_seed
from wound_augment.data.dataset import LabeledDataset, balance, content_hash, ingest, merge, split
from wound_augment.data.manifest import write_manifest
from wound_augment.data.synthetic import generate_synthetic_tree
from wound_augment.eval.metrics import EvaluationReport, compare
from wound_augment.io.plots import plot_sample_sheet, render_plots
from wound_augment.io.results import (
    METRICS_FILE,
    RESULTS_FILE,
    ResultsIndex,
    RunRecord,
    make_run_id,
    write_jsonl,
)
from wound_augment.models.backbone import locate_weights
from wound_augment.models.classifier import evaluate, save_model, train
from wound_augment.models.degan import GanModel, diversity, generate, save_gan, train_gan

logger = logging.getLogger(__name__)

CONDITION_STAGE = "condition"
COMPARISON_TEXT = "comparison.txt"
COMPARISON_JSONL = "comparison.jsonl"

__all__ = [
    "ExperimentRunner",
    "Finding",
    "RunRecord",
    "grid_series",
    "run_experiment",
    "validate_config",
]


# =============================================================================
# Config validation
# =============================================================================


@dataclass(frozen=True)
class Finding:
    """One config validation finding."""

    severity: Severity
    key: str
    message: str

    def to_dict(self) -> dict[str, str]:
        return {"severity": self.severity.value, "key": self.key, "message": self.message}

    def __str__(self) -> str:
        return f"{self.severity.value}: {self.key}: {self.message}"


def validate_config(raw: Mapping[str, Any] | ExperimentConfig) -> list[Finding]:
    """Structural and semantic checks; never raises and has no side effects."""
    if isinstance(raw, ExperimentConfig):
        cfg = raw
    else:
        try:
            cfg = ExperimentConfig.model_validate(dict(raw))
        except ValidationError as e:
            return [
                Finding(
                    Severity.ERROR,
                    ".".join(str(part) for part in err["loc"]) or "<root>",
                    err["msg"],
                )
                for err in e.errors()
            ]

    findings: list[Finding] = []
    if cfg.dataset_root is not None:
        root = Path(cfg.dataset_root)
        if not root.is_dir():
            findings.append(Finding(Severity.ERROR, "dataset_root", f"not a directory: {root}"))
        else:
            missing = [
                label.value for label in DEFAULT_CATALOG if not (root / label.value).is_dir()
            ]
            if missing:
                findings.append(
                    Finding(
                        Severity.ERROR,
                        "dataset_root",
                        f"missing class directories: {', '.join(missing)}",
                    )
                )

    output = Path(cfg.output_dir)
    if output.exists() and not output.is_dir():
        findings.append(Finding(Severity.ERROR, "output_dir", f"not a directory: {output}"))

    for i, lr in enumerate(cfg.grid.lr_list):
        if lr >= AGGRESSIVE_LEARNING_RATE:
            findings.append(
                Finding(
                    Severity.WARNING,
                    f"grid.lr_list.{i}",
                    f"learning rate {lr:g} is aggressive and often trains poorly",
                )
            )

    for i, backbone in enumerate(cfg.grid.backbones):
        if backbone.name.is_adapter:
            try:
                locate_weights(backbone)
            except WoundAugError as e:
                findings.append(Finding(Severity.ERROR, f"grid.backbones.{i}", e.message))

    names = [c.name for c in cfg.conditions]
    for name in sorted({n for n in names if names.count(n) > 1}, key=names.index):
        findings.append(Finding(Severity.ERROR, "conditions", f"duplicate condition {name.value}"))
    height, width, _ = cfg.shape
    needs_gan = any(n in (Condition.DEGAN_AUG, Condition.COMBINED_AUG) for n in names)
    if needs_gan and (height % 4 or width % 4):
        findings.append(
            Finding(Severity.ERROR, "shape", "DE-GAN needs height and width divisible by 4")
        )
    return findings


# =============================================================================
# Runner
# =============================================================================


@dataclass
class PreparedData:
    full: LabeledDataset
    balanced: LabeledDataset
    train: LabeledDataset
    test: LabeledDataset
    source_root: Path
    split_hash: str
    manifest: Path


class ExperimentRunner:
    """Runs one ``ExperimentConfig`` into its output directory.

    Completed runs found in ``results.jsonl`` are reused, so an interrupted
    experiment resumes where it stopped.
    """

    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.output_dir = Path(cfg.output_dir)
        self.index = ResultsIndex(self.output_dir / RESULTS_FILE)
        self._gans: dict[str, GanModel] = {}
        self._notes: dict[str, Any] = {}
        self.grid_results: list[GridPointResult] = []
        self.plot_error: str | None = None

    def seed(self, *labels: str | int) -> int:
        return derive_seed(self.cfg.global_seed, *labels)

    # -- data ---------------------------------------------------------------

    def prepare_data(self) -> PreparedData:
        cfg = self.cfg
        if cfg.dataset_root is not None:
            source_root = Path(cfg.dataset_root)
        else:
            assert cfg.synthetic is not None
            source_root = generate_synthetic_tree(
                self.output_dir / "data",
                cfg.synthetic.per_class,
                shape=tuple(cfg.shape),
                seed=cfg.synthetic.seed,
            )
        full = ingest(source_root, tuple(cfg.shape), max_workers=cfg.max_workers)
        balanced = balance(
            full, cfg.balance_per_class, self.seed("balance"), strict=cfg.balance_strict
        )
        split_spec = cfg.split.model_copy(update={"seed": self.seed("split")})
        train_ds, test_ds = split(balanced, split_spec)

        split_hash = f"{content_hash(train_ds)[:12]}-{content_hash(test_ds)[:12]}"
        manifest = self.output_dir / "phase1" / split_hash / "split.jsonl"
        if not manifest.exists():
            write_manifest(manifest, {"train": train_ds, "test": test_ds}, source_root=source_root)
        logger.info(
            "Phase 1 data: %d ingested, %d balanced, %d train / %d test (%s)",
            len(full),
            len(balanced),
            len(train_ds),
            len(test_ds),
            split_hash,
        )
        return PreparedData(full, balanced, train_ds, test_ds, source_root, split_hash, manifest)

    def _backbone(self, spec: BackboneSpec) -> BackboneSpec:
        return spec.model_copy(update={"input_shape": tuple(self.cfg.shape)})

    # -- phase 1 ------------------------------------------------------------

    def run_transfer_grid(self, data: PreparedData) -> list[GridPointResult]:
        grid = self.cfg.grid.model_copy(
            update={"backbones": [self._backbone(b) for b in self.cfg.grid.backbones]}
        )
        configs = grid.configs(data.train.num_classes, self.seed("train"))
        return run_grid(
            data.train,
            data.test,
            configs,
            max_workers=self.cfg.max_workers,
            run_dir=self.output_dir / "grid",
            index=self.index,
            condition=Condition.XFER_ONLY,
        )

    # -- augmented training sets ----------------------------------------------

    def _gan_images(self, spec: ConditionSpec, data: PreparedData, out_dir: Path) -> LabeledDataset:
        if spec.gan_source == "pre-balance":
            test_ids = set(data.test.source_ids())
            pool = data.full.subset(spec.gan_class)
            class_ds = pool.with_samples([s for s in pool if s.source_id not in test_ids])
        else:
            class_ds = data.train.subset(spec.gan_class)

        gan_cfg: GanConfig = spec.gan.model_copy(
            update={
                "image_shape": tuple(self.cfg.shape),
                "seed": self.seed("gan", spec.gan_class.value),
            }
        )
        key = f"{spec.gan_source}:{spec.gan_class.value}:{gan_cfg.model_dump_json()}"
        model = self._gans.get(key)
        if model is None:
            gan_dir = self.output_dir / f"gan-{spec.gan_class.value}-{spec.gan_source}"
            model = train_gan(class_ds, gan_cfg, run_dir=gan_dir)
            save_gan(model, gan_dir)
            self._gans[key] = model

        report = diversity(model, 16, self.cfg.collapse_threshold, seed=self.seed("diversity"))
        self._notes["diversity"] = {
            "mean": report.mean_pairwise_distance,
            "min": report.min_pairwise_distance,
            "collapse": report.collapse_flag,
        }

        seed = self.seed("generate", spec.gan_class.value)
        if spec.curated_indices:
            pool_size = max(max(spec.curated_indices) + 1, spec.gan_count)
            candidates = generate(model, pool_size, seed)
            picked = [candidates.samples[i] for i in spec.curated_indices]
            synthetic = candidates.with_samples(picked)
        else:
            synthetic = generate(model, spec.gan_count, seed)
        plot_sample_sheet(synthetic.images(), out_dir / "gan_samples.png", title="DE-GAN samples")
        return synthetic

    def build_training_set(
        self, spec: ConditionSpec, data: PreparedData, out_dir: Path
    ) -> LabeledDataset:
        """Training set for one condition (un-augmented when re-augmenting per epoch)."""
        train_ds = data.train.with_samples(data.train.samples)
        policy = spec.policy.model_copy(update={"seed": self.seed("augment", spec.name.value)})
        if spec.name in (Condition.GEOMETRIC_AUG, Condition.COMBINED_AUG) and not (
            spec.reaugment_each_epoch
        ):
            train_ds = augment_dataset(train_ds, policy, max_workers=self.cfg.max_workers)
        if spec.name in (Condition.DEGAN_AUG, Condition.COMBINED_AUG):
            train_ds = merge(train_ds, self._gan_images(spec, data, out_dir))
        return train_ds

    # -- conditions -----------------------------------------------------------

    def run_condition(
        self,
        spec: ConditionSpec,
        data: PreparedData,
        best: TrainConfig,
        grid_results: list[GridPointResult],
    ) -> RunRecord:
        name = spec.name.value
        out_dir = self.output_dir / name
        train_cfg = best.model_copy(
            update={"reaugment_each_epoch": spec.reaugment_each_epoch}
        )
        run_id = make_run_id(
            data.split_hash,
            CONDITION_STAGE,
            spec.model_dump_json(),
            train_cfg.model_dump_json(),
            str(self.cfg.global_seed),
        )
        done = self.index.completed(run_id)
        if done is not None:
            logger.info("Reusing completed %s run %s", name, run_id)
            return done

        self._notes = {}
        start = time.monotonic()
        try:
            if spec.name is Condition.XFER_ONLY:
                best_point = select_best(grid_results)
                report = best_point.report
                assert report is not None
                stopped = best_point.stopped_epoch
                artifacts = {"grid": str(self.output_dir / "grid")}
            else:
                train_ds = self.build_training_set(spec, data, out_dir)
                manifest = write_manifest(
                    out_dir / "train_manifest.jsonl",
                    {"train": train_ds, "test": data.test},
                    source_root=data.source_root,
                )
                policy = spec.policy.model_copy(update={"seed": self.seed("augment", name)})
                model = train(
                    train_ds,
                    train_cfg,
                    reaugment_policy=policy if spec.reaugment_each_epoch else None,
                )
                report = evaluate(model, data.test, spec.name, train_ds=train_ds)
                save_model(model, out_dir / "model")
                stopped = model.stopped_epoch
                artifacts = {"manifest": str(manifest), "model": str(out_dir / "model")}
            record = RunRecord(
                run_id=run_id,
                stage=CONDITION_STAGE,
                condition=name,
                config_label=train_cfg.label(),
                config=train_cfg.model_dump(mode="json"),
                success=True,
                report=report.to_dict(),
                stopped_epoch=stopped,
                duration_seconds=time.monotonic() - start,
                dataset_hash=data.split_hash,
                artifacts=artifacts,
                notes=self._notes,
            )
            logger.info("%s: test accuracy %.3f", name, report.accuracy)
        except Exception as e:
            logger.error("Condition %s failed: %s", name, e)
            record = RunRecord(
                run_id=run_id,
                stage=CONDITION_STAGE,
                condition=name,
                config_label=train_cfg.label(),
                config=train_cfg.model_dump(mode="json"),
                success=False,
                error=str(e),
                duration_seconds=time.monotonic() - start,
                dataset_hash=data.split_hash,
            )
        return self.index.append(record)

    # -- outputs --------------------------------------------------------------

    def write_summaries(self, records: list[RunRecord]) -> list[EvaluationReport]:
        reports: list[EvaluationReport] = []
        rows: list[dict[str, Any]] = []
        for record in records:
            if record.success and record.report is not None:
                reports.append(EvaluationReport.from_dict(record.report))
                rows.append({"run_id": record.run_id, **record.report})
        write_jsonl(self.output_dir / METRICS_FILE, rows)

        if len(reports) >= 2:
            table = compare(reports)
            (self.output_dir / COMPARISON_TEXT).write_text(table.render_text())
            write_jsonl(self.output_dir / COMPARISON_JSONL, table.to_records())
        return reports

    def run(self) -> list[RunRecord]:
        """Execute every stage; returns one record per condition."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        data = self.prepare_data()

        grid_results = self.run_transfer_grid(data)
        self.grid_results = grid_results
        try:
            best = select_best(grid_results).config
        except WoundAugError as e:
            logger.error("Transfer-learning grid produced no model: %s", e)
            best = self.cfg.grid.configs(data.train.num_classes, self.seed("train"))[0]
            best = best.model_copy(update={"backbone": self._backbone(best.backbone)})
        logger.info("Best phase-1 configuration: %s", best.label())

        records = [
            self.run_condition(spec, data, best, grid_results) for spec in self.cfg.conditions
        ]
        self.write_summaries(records)

        self.plot_error = None
        try:
            render_plots(self.output_dir)
        except Exception as e:
            self.plot_error = str(e) or type(e).__name__
            logger.error("Plot rendering failed: %s", e)
        return records


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    """Run the full experiment described by ``cfg``."""
    return ExperimentRunner(cfg).run()
