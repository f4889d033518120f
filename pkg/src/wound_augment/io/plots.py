"""Figure writers: grid accuracy curves, confusion heat maps, sample sheets, GAN losses.

All figures are written as PNG through the non-interactive Agg backend.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from wound_augment.core.exceptions import EvaluationError  # noqa: E402
from wound_augment.eval.metrics import ConfusionMatrix, EvaluationReport  # noqa: E402
from wound_augment.io.results import (  # noqa: E402
    METRICS_FILE,
    RESULTS_FILE,
    ResultsIndex,
    read_jsonl,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

DPI = 120
SHEET_SIZE = 16
SHEET_SEED = 0


def _save(fig: plt.Figure, path: Path | str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out, dpi=DPI, bbox_inches="tight", facecolor="white")
    plt.close(fig)
    logger.debug("Wrote %s", out)
    return out


def plot_grid_curves(
    series: Mapping[str, Sequence[tuple[float, float]]],
    path: Path | str,
    title: str = "Test accuracy by hyperparameter combination",
) -> Path:
    """Test accuracy against learning rate, one line per (backbone, epochs) series."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, points in series.items():
        ordered = sorted(points)
        ax.plot(
            [lr for lr, _ in ordered],
            [acc for _, acc in ordered],
            marker="o",
            label=name,
        )
    ax.set_xscale("log")
    ax.set_xlabel("Learning rate")
    ax.set_ylabel("Test accuracy")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.grid(True, alpha=0.3, linestyle="--")
    if series:
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_confusion(matrix: ConfusionMatrix, path: Path | str, title: str | None = None) -> Path:
    """Heat map of confusion counts, annotated with each cell's count."""
    counts = matrix.counts
    codes = [label.value for label in matrix.labels]
    fig, ax = plt.subplots(figsize=(5, 4.5))
    image = ax.imshow(counts, cmap="Blues")
    fig.colorbar(image, ax=ax)
    ax.set_xticks(range(len(codes)))
    ax.set_yticks(range(len(codes)))
    ax.set_xticklabels(codes)
    ax.set_yticklabels(codes)
    ax.set_xlabel("Predicted")
    ax.set_ylabel("True")
    threshold = counts.max() / 2 if counts.size else 0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            ax.text(
                j,
                i,
                str(counts[i, j]),
                ha="center",
                va="center",
                color="white" if counts[i, j] > threshold else "black",
            )
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_sample_sheet(
    images: NDArray[np.float32],
    path: Path | str,
    ncols: int = 8,
    title: str | None = None,
) -> Path:
    """Grid of (N, H, W, C) images, numbered in reading order."""
    n = len(images)
    ncols = max(1, min(ncols, n))
    nrows = max(1, math.ceil(n / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(1.3 * ncols, 1.3 * nrows), squeeze=False)
    for k, ax in enumerate(axes.flat):
        ax.axis("off")
        if k >= n:
            continue
        img = np.clip(images[k], 0.0, 1.0)
        if img.shape[-1] == 1:
            ax.imshow(img[..., 0], cmap="gray", vmin=0.0, vmax=1.0)
        elif img.shape[-1] in (3, 4):
            ax.imshow(img)
        else:
            ax.imshow(img[..., 0], cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(str(k), fontsize=7)
    if title:
        fig.suptitle(title)
    return _save(fig, path)


def plot_loss_history(
    history: Sequence[Sequence[float]] | Sequence[Mapping[str, float]],
    path: Path | str,
    title: str = "DE-GAN losses",
) -> Path:
    """Per-epoch generator, discriminator and hidden losses."""
    rows = [
        dict(h) if isinstance(h, Mapping) else h._asdict()  # type: ignore[union-attr]
        for h in history
    ]
    epochs = np.arange(1, len(rows) + 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, label in (("gen", "generator"), ("disc", "discriminator"), ("hid", "hidden (VAE)")):
        ax.plot(epochs, [row[key] for row in rows], label=label)
    ax.set_xlabel("Epoch")
    ax.set_ylabel("Loss")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)


def render_plots(run_dir: Path | str) -> list[Path]:
    """Regenerate every figure for a finished run directory.

    Raises:
        EvaluationError: If the directory holds no records to plot.
    """
    root = Path(run_dir)
    figures = root / "figures"
    written: list[Path] = []

    results_path = root / RESULTS_FILE
    if results_path.exists():
        from wound_augment.apps.grid import grid_series

        index = ResultsIndex(results_path)
        series = grid_series(index.records(stage="grid"))
        if series:
            written.append(plot_grid_curves(series, figures / "grid_curves.png"))

    metrics_path = root / METRICS_FILE
    if metrics_path.exists():
        for row in read_jsonl(metrics_path):
            report = EvaluationReport.from_dict(row)
            written.append(
                plot_confusion(
                    report.matrix,
                    figures / f"confusion_{report.condition}.png",
                    title=f"{report.condition} ({report.config_label})",
                )
            )

    for info_path in sorted(root.glob("gan-*/gan.json")):
        from wound_augment.models.degan import generate_pixels, load_gan

        name = info_path.parent.name
        history = json.loads(info_path.read_text())["loss_history"]
        if history:
            written.append(plot_loss_history(history, figures / f"{name}_losses.png"))
        model = load_gan(info_path.parent)
        written.append(
            plot_sample_sheet(
                generate_pixels(model, SHEET_SIZE, seed=SHEET_SEED),
                figures / f"{name}_samples.png",
                title=f"DE-GAN samples ({model.label.value})",
            )
        )

    if not written:
        raise EvaluationError(f"Nothing to plot in {root}")

    logger.info("Rendered %d figures into %s", len(written), figures)
    return written
