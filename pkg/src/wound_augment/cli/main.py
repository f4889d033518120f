"""CLI entry point for the wound augmentation study.

Every stage of the experiment is available as its own subcommand working on
manifests and model directories, and ``run`` executes the whole pipeline
from a config file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from wound_augment.core.config import (
    DEFAULT_BALANCE_PER_CLASS,
    DEFAULT_SHAPE,
    DEFAULT_TRAIN_FRACTION,
    AugmentationPolicy,
    BackboneName,
    BackboneSpec,
    ClassLabel,
    Condition,
    ExperimentConfig,
    GanConfig,
    SplitSpec,
    TrainConfig,
    load_config_mapping,
)
from wound_augment.core.exceptions import ConfigError, WoundAugError
from wound_augment.core.seeding import derive_seed

logger = logging.getLogger(__name__)

Shape = tuple[int, int, int]


def setup_logging(verbose: bool) -> None:
    """Configure logging based on verbosity."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%H:%M:%S",
    )


# =============================================================================
# Config handling
# =============================================================================


def _overrides(args: argparse.Namespace) -> list[str]:
    overrides = list(args.set or [])
    if args.output_dir is not None:
        overrides.append(f"output_dir={args.output_dir}")
    if args.seed is not None:
        overrides.append(f"global_seed={args.seed}")
    return overrides


def load_config(args: argparse.Namespace) -> ExperimentConfig | None:
    """Experiment config from ``--config`` with ``--set``/``--output-dir``/``--seed`` applied."""
    if args.config is None:
        if args.set:
            raise ConfigError("--set needs --config")
        return None
    data = load_config_mapping(args.config, _overrides(args))
    try:
        return ExperimentConfig.model_validate(data)
    except ValueError as e:
        raise ConfigError(f"Invalid config {args.config}", str(e)) from e


def _require_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args)
    if cfg is None:
        raise ConfigError(f"'{args.command}' needs --config")
    return cfg


def _shape(args: argparse.Namespace, cfg: ExperimentConfig | None) -> Shape:
    if getattr(args, "shape", None):
        height, width, channels = args.shape
        return (height, width, channels)
    return tuple(cfg.shape) if cfg is not None else DEFAULT_SHAPE  # type: ignore[return-value]


def _seed(args: argparse.Namespace, cfg: ExperimentConfig | None, *labels: str) -> int:
    """Explicit ``--seed`` wins; otherwise the config's global seed, derived per stage."""
    if args.seed is not None:
        return int(args.seed)
    base = cfg.global_seed if cfg is not None else 0
    return derive_seed(base, *labels)


def _condition_spec(cfg: ExperimentConfig | None, *names: Condition) -> Any:
    if cfg is None:
        return None
    for spec in cfg.conditions:
        if spec.name in names:
            return spec
    return None


# =============================================================================
# Data commands
# =============================================================================


def cmd_ingest(args: argparse.Namespace) -> int:
    from wound_augment.data.dataset import ingest
    from wound_augment.data.manifest import write_manifest

    cfg = load_config(args)
    root = Path(args.root)
    ds = ingest(root, _shape(args, cfg), max_workers=args.workers)
    out = write_manifest(args.out, {args.split_name: ds}, source_root=root)
    counts = ", ".join(f"{label.value}={n}" for label, n in ds.class_counts.items())
    print(f"Ingested {len(ds)} images ({counts})")
    print(f"Manifest: {out}")
    return 0


def cmd_balance(args: argparse.Namespace) -> int:
    from wound_augment.data.dataset import balance
    from wound_augment.data.manifest import read_split, write_manifest

    cfg = load_config(args)
    ds = read_split(args.manifest, _shape(args, cfg), args.split)
    per_class = args.per_class or (cfg.balance_per_class if cfg else DEFAULT_BALANCE_PER_CLASS)
    strict = args.strict or (cfg.balance_strict if cfg else False)
    balanced = balance(ds, per_class, _seed(args, cfg, "balance"), strict=strict)
    out = write_manifest(args.out, {args.split or "all": balanced})
    print(f"Balanced {len(ds)} -> {len(balanced)} images ({per_class} per class)")
    print(f"Manifest: {out}")
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    from wound_augment.data.dataset import split
    from wound_augment.data.manifest import read_split, write_manifest

    cfg = load_config(args)
    ds = read_split(args.manifest, _shape(args, cfg), args.split)
    base = cfg.split if cfg is not None else SplitSpec(train_fraction=DEFAULT_TRAIN_FRACTION)
    update: dict[str, Any] = {"seed": _seed(args, cfg, "split")}
    if args.train_fraction is not None:
        update["train_fraction"] = args.train_fraction
    spec = SplitSpec.model_validate({**base.model_dump(), **update})
    train_ds, test_ds = split(ds, spec)
    out = write_manifest(args.out, {"train": train_ds, "test": test_ds})
    print(f"Split {len(ds)} images into {len(train_ds)} train / {len(test_ds)} test")
    print(f"Manifest: {out}")
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    from wound_augment.augment.geometric import augment_dataset
    from wound_augment.data.manifest import read_manifest, write_manifest

    cfg = load_config(args)
    splits = read_manifest(args.manifest, _shape(args, cfg))
    if args.split not in splits:
        raise ConfigError(f"Split '{args.split}' not in {args.manifest}", f"found {sorted(splits)}")
    spec = _condition_spec(cfg, Condition.GEOMETRIC_AUG, Condition.COMBINED_AUG)
    policy: AugmentationPolicy = spec.policy if spec is not None else AugmentationPolicy()
    update: dict[str, Any] = {"seed": _seed(args, cfg, "augment", Condition.GEOMETRIC_AUG.value)}
    if args.rotation is not None:
        update["rotation_max_deg"] = args.rotation
    if args.brightness is not None:
        update["brightness_max_delta"] = args.brightness
    if args.signed:
        update["signed_brightness"] = True
    if args.concatenate:
        update["concatenate"] = True
    policy = AugmentationPolicy.model_validate({**policy.model_dump(), **update})

    splits[args.split] = augment_dataset(splits[args.split], policy, max_workers=args.workers)
    out = write_manifest(args.out, splits)
    print(f"Augmented {args.split}: {len(splits[args.split])} images")
    print(f"Manifest: {out}")
    return 0


# =============================================================================
# DE-GAN commands
# =============================================================================


def cmd_gan_train(args: argparse.Namespace) -> int:
    from wound_augment.data.manifest import read_split
    from wound_augment.models.degan import save_gan, train_gan

    cfg = load_config(args)
    shape = _shape(args, cfg)
    spec = _condition_spec(cfg, Condition.DEGAN_AUG, Condition.COMBINED_AUG)
    label = ClassLabel(args.label) if args.label else (spec.gan_class if spec else ClassLabel.D)
    base = spec.gan if spec is not None else GanConfig(image_shape=shape)
    update: dict[str, Any] = {"image_shape": shape, "seed": _seed(args, cfg, "gan", label.value)}
    if args.epochs is not None:
        update["epochs"] = args.epochs
    if args.lambda_hid is not None:
        update["lambda_hid"] = args.lambda_hid
    if args.grayscale:
        update["grayscale"] = True
    gan_cfg = GanConfig.model_validate({**base.model_dump(), **update})

    class_ds = read_split(args.manifest, shape, args.split).subset(label)
    out_dir = Path(args.out)
    model = train_gan(class_ds, gan_cfg, run_dir=out_dir)
    save_gan(model, out_dir)
    final = model.loss_history[-1] if model.loss_history else None
    print(f"Trained DE-GAN for class {label.value} on {len(class_ds)} images")
    if final is not None:
        print(f"  final losses: gen={final.gen:.4f} disc={final.disc:.4f} hid={final.hid:.4f}")
    print(f"Saved to {out_dir}")
    return 0


def cmd_gan_generate(args: argparse.Namespace) -> int:
    from wound_augment.data.manifest import write_manifest
    from wound_augment.io.plots import plot_sample_sheet
    from wound_augment.models.degan import diversity, generate, load_gan

    cfg = load_config(args)
    model = load_gan(args.gan_dir)
    seed = _seed(args, cfg, "generate", model.label.value)
    count = args.curate if args.curate else args.count
    images = generate(model, count, seed)
    out = write_manifest(args.out, {args.split_name: images})

    if count >= 2:
        threshold = cfg.collapse_threshold if cfg is not None else 0.01
        report = diversity(model, count, threshold, seed=seed)
        print(f"Mean pairwise distance {report.mean_pairwise_distance:.4f}")
    if args.curate:
        sheet = plot_sample_sheet(
            images.images(), out.with_suffix(".png"), title=f"Candidates ({model.label.value})"
        )
        print(f"Wrote {count} candidates; pick indices from {sheet}")
        print("and list them as curated_indices of the degan-aug condition in the config")
    else:
        print(f"Generated {count} class-{model.label.value} images")
    print(f"Manifest: {out}")
    return 0


# =============================================================================
# Classifier commands
# =============================================================================


def cmd_train(args: argparse.Namespace) -> int:
    from wound_augment.data.manifest import read_split
    from wound_augment.models.classifier import save_model, train

    cfg = load_config(args)
    shape = _shape(args, cfg)
    train_ds = read_split(args.manifest, shape, args.split)
    backbone = BackboneSpec(
        name=BackboneName(args.backbone), input_shape=shape, weights_path=args.weights
    )
    train_cfg = TrainConfig(
        backbone=backbone,
        num_classes=train_ds.num_classes,
        epochs=args.epochs,
        learning_rate=args.lr,
        batch_size=args.batch_size,
        seed=_seed(args, cfg, "train"),
    )
    model = train(train_ds, train_cfg)
    out = save_model(model, args.out)
    stopped = " (early stop)" if model.early_stopped else ""
    print(f"Trained {train_cfg.label()} for {model.stopped_epoch} epochs{stopped}")
    if model.final_train_accuracy is not None:
        print(f"  train accuracy {model.final_train_accuracy:.3f}")
    print(f"Saved to {out}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from wound_augment.data.manifest import read_split
    from wound_augment.models.classifier import evaluate, load_model
    from wound_augment.ui.display import display_report

    model = load_model(args.model_dir)
    shape = tuple(model.config.backbone.input_shape)
    test_ds = read_split(args.manifest, shape, args.split)  # type: ignore[arg-type]
    report = evaluate(model, test_ds, args.condition)
    display_report(report)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
        print(f"Report: {out}")
    return 0


def _read_reports(paths: Sequence[str]) -> list[Any]:
    from wound_augment.eval.metrics import EvaluationReport
    from wound_augment.io.results import read_jsonl

    reports = []
    for name in paths:
        path = Path(name)
        if path.suffix == ".jsonl":
            reports.extend(EvaluationReport.from_dict(row) for row in read_jsonl(path))
        else:
            reports.append(EvaluationReport.from_dict(json.loads(path.read_text())))
    return reports


def cmd_compare(args: argparse.Namespace) -> int:
    from wound_augment.eval.metrics import compare
    from wound_augment.ui.display import display_comparison

    table = compare(_read_reports(args.reports))
    display_comparison(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(table.render_text())
        print(f"Comparison: {out}")
    return 0


# =============================================================================
# Experiment commands
# =============================================================================


def cmd_run(args: argparse.Namespace) -> int:
    from wound_augment.apps.pipeline import ExperimentRunner, validate_config
    from wound_augment.core.config import Severity
    from wound_augment.eval.metrics import EvaluationReport, compare
    from wound_augment.ui.display import (
        display_comparison,
        display_findings,
        display_grid,
        display_records,
        print_banner,
        print_error,
        print_success,
        print_warning,
    )

    cfg = _require_config(args)
    findings = validate_config(cfg)
    if any(f.severity is Severity.ERROR for f in findings):
        display_findings(findings)
        return 1

    print_banner(f"Experiment: {cfg.name}", f"output: {cfg.output_dir}, seed {cfg.global_seed}")
    runner = ExperimentRunner(cfg)
    records = runner.run()
    if runner.grid_results:
        display_grid(runner.grid_results)
    display_records(records)
    for record in records:
        if record.notes.get("diversity", {}).get("collapse"):
            print_warning(f"{record.condition}: DE-GAN samples look mode-collapsed")
    reports = [EvaluationReport.from_dict(r.report) for r in records if r.report is not None]
    if len(reports) >= 2:
        display_comparison(compare(reports))
    if runner.plot_error is not None:
        print_error(f"Plot rendering failed: {runner.plot_error}")
        return 1
    if not all(r.success for r in records):
        return 1
    print_success(f"Results written to {runner.output_dir}")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    from wound_augment.io.plots import render_plots

    written = render_plots(args.run_dir)
    for path in written:
        print(path)
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    from wound_augment.apps.pipeline import validate_config
    from wound_augment.core.config import Severity
    from wound_augment.ui.display import display_findings

    if args.config is None:
        raise ConfigError("'validate' needs --config")
    findings = validate_config(load_config_mapping(args.config, _overrides(args)))
    display_findings(findings)
    if args.json:
        print(json.dumps([f.to_dict() for f in findings], indent=2))
    return 1 if any(f.severity is Severity.ERROR for f in findings) else 0


# =============================================================================
# Parser
# =============================================================================


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="Experiment config (YAML)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override a config key, e.g. --set grid.lr_list=[0.001] (repeatable)",
    )
    parser.add_argument("--output-dir", type=str, default=None, help="Override output_dir")
    parser.add_argument("--seed", type=int, default=None, help="Override the seed")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable verbose output")


def _add_shape(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--shape",
        type=int,
        nargs=3,
        metavar=("H", "W", "C"),
        default=None,
        help=f"Image shape (default: config shape or {DEFAULT_SHAPE})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="woundaug",
        description="Wound image augmentation study - transfer learning, geometric and DE-GAN",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("ingest", help="Load a directory-per-class image tree")
    p.add_argument("root", help="Dataset root with one directory per class code")
    p.add_argument("-o", "--out", required=True, help="Manifest to write")
    p.add_argument("--split-name", default="all", help="Split name in the manifest")
    p.add_argument("--workers", type=int, default=None, help="Decoder threads")
    _add_shape(p)
    p.set_defaults(func=cmd_ingest)

    p = subparsers.add_parser("balance", help="Subsample every class to a common size")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--split", default=None, help="Split to read (default: all records)")
    p.add_argument("--per-class", type=int, default=None, help="Target images per class")
    p.add_argument("--strict", action="store_true", help="Fail when a class is underpopulated")
    _add_shape(p)
    p.set_defaults(func=cmd_balance)

    p = subparsers.add_parser("split", help="Stratified train/test split")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--split", default=None, help="Split to read (default: all records)")
    p.add_argument("--train-fraction", type=float, default=None)
    _add_shape(p)
    p.set_defaults(func=cmd_split)

    p = subparsers.add_parser("augment", help="Geometric augmentation of one split")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--rotation", type=float, default=None, help="Max rotation in degrees")
    p.add_argument("--brightness", type=float, default=None, help="Max brightness delta")
    p.add_argument("--signed", action="store_true", help="Allow darkening as well")
    p.add_argument("--concatenate", action="store_true", help="Keep the originals too")
    p.add_argument("--workers", type=int, default=None)
    _add_shape(p)
    p.set_defaults(func=cmd_augment)

    p = subparsers.add_parser("gan-train", help="Train a DE-GAN on one class")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True, help="Model directory")
    p.add_argument("--label", choices=[c.value for c in ClassLabel], default=None)
    p.add_argument("--split", default="train")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lambda-hid", type=float, default=None)
    p.add_argument("--grayscale", action="store_true")
    _add_shape(p)
    p.set_defaults(func=cmd_gan_train)

    p = subparsers.add_parser("gan-generate", help="Sample images from a trained DE-GAN")
    p.add_argument("gan_dir")
    p.add_argument("-o", "--out", required=True, help="Manifest to write")
    p.add_argument("-n", "--count", type=int, default=14)
    p.add_argument(
        "--curate",
        type=int,
        default=None,
        metavar="K",
        help="Write K candidates and a numbered sample sheet for manual selection",
    )
    p.add_argument("--split-name", default="train")
    p.set_defaults(func=cmd_gan_generate)

    p = subparsers.add_parser("train", help="Train a classification head on frozen features")
    p.add_argument("manifest")
    p.add_argument("-o", "--out", required=True, help="Model directory")
    p.add_argument("--split", default="train")
    p.add_argument(
        "--backbone", choices=[b.value for b in BackboneName], default=BackboneName.TINY_CNN.value
    )
    p.add_argument("--weights", default=None, help="Adapter weights file")
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch-size", type=int, default=16)
    _add_shape(p)
    p.set_defaults(func=cmd_train)

    p = subparsers.add_parser("evaluate", help="Evaluate a trained model on a split")
    p.add_argument("model_dir")
    p.add_argument("manifest")
    p.add_argument("--split", default="test")
    p.add_argument("--condition", default=Condition.XFER_ONLY.value)
    p.add_argument("-o", "--out", default=None, help="Report JSON to write")
    p.set_defaults(func=cmd_evaluate)

    p = subparsers.add_parser("compare", help="Compare evaluation reports (first is baseline)")
    p.add_argument("reports", nargs="+", help="Report JSON files or metrics.jsonl")
    p.add_argument("-o", "--out", default=None, help="Text table to write")
    p.set_defaults(func=cmd_compare)

    p = subparsers.add_parser("run", help="Run the full experiment from --config")
    p.set_defaults(func=cmd_run)

    p = subparsers.add_parser("plot", help="Render figures for a finished run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_plot)

    p = subparsers.add_parser("validate", help="Check a config without running it")
    p.add_argument("--json", action="store_true", help="Also print findings as JSON")
    p.set_defaults(func=cmd_validate)

    for sub in subparsers.choices.values():
        _add_common(sub)
    return parser


def main(argv: Sequence[str] | None = None) -> None:
    """woundaug CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    func: Callable[[argparse.Namespace], int] = args.func
    try:
        code = func(args)
    except KeyboardInterrupt:
        print("\nStopped")
        sys.exit(130)
    except WoundAugError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    sys.exit(code)


if __name__ == "__main__":
    main()
