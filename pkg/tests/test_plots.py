"""Tests for figure rendering."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from wound_augment.core.config import ClassLabel, GanConfig
from wound_augment.core.exceptions import EvaluationError
from wound_augment.data.synthetic import toy_blob_dataset
from wound_augment.eval.metrics import EvaluationReport, confusion
from wound_augment.io.plots import (
    plot_confusion,
    plot_grid_curves,
    plot_loss_history,
    plot_sample_sheet,
    render_plots,
)
from wound_augment.io.results import METRICS_FILE, write_jsonl
from wound_augment.models.degan import save_gan, train_gan

CATALOG = (ClassLabel.D, ClassLabel.P)


class TestPlots:
    """Tests for individual figures."""

    def test_grid_curves(self, tmp_path: Path):
        """One line per series is written to a PNG."""
        series = {"tiny-cnn-e10": [(0.001, 0.5), (0.01, 0.7)], "tiny-cnn-e30": [(0.001, 0.6)]}
        out = plot_grid_curves(series, tmp_path / "grid.png")
        assert out.is_file()
        assert out.stat().st_size > 0

    def test_confusion(self, tmp_path: Path):
        """Confusion heatmaps are written, creating parent directories."""
        cm = confusion(["D", "P", "P"], ["D", "D", "P"], CATALOG)
        out = plot_confusion(cm, tmp_path / "figs" / "cm.png", title="xfer-only")
        assert out.is_file()

    def test_sample_sheet(self, tmp_path: Path):
        """Image grids are written for partial final rows too."""
        images = np.random.default_rng(0).uniform(size=(5, 8, 8, 3)).astype(np.float32)
        assert plot_sample_sheet(images, tmp_path / "sheet.png", ncols=4).is_file()

    def test_loss_history(self, tmp_path: Path):
        """Loss histories plot from mappings."""
        history = [{"gen": 1.0, "disc": 0.7, "hid": 0.2, "adv": 0.8}] * 3
        assert plot_loss_history(history, tmp_path / "loss.png").is_file()


class TestRenderPlots:
    """Tests for whole-run figure regeneration."""

    def test_metrics_and_gan(self, tmp_path: Path, small_gan_config: GanConfig):
        """Confusion figures per condition and GAN figures per saved GAN."""
        report = EvaluationReport.from_matrix(
            "degan-aug", confusion(["D", "P"], ["D", "P"], CATALOG), "tiny-cnn-e10-lr0.01"
        )
        write_jsonl(tmp_path / METRICS_FILE, [{"run_id": "r1", **report.to_dict()}])
        model = train_gan(toy_blob_dataset(8, shape=(8, 8, 3)), small_gan_config)
        save_gan(model, tmp_path / "gan-D-train")

        written = render_plots(tmp_path)
        names = {p.name for p in written}
        assert "confusion_degan-aug.png" in names
        assert "gan-D-train_losses.png" in names
        assert "gan-D-train_samples.png" in names
        assert all(p.parent == tmp_path / "figures" for p in written)

    def test_nothing_to_plot(self, tmp_path: Path):
        """An empty run directory is an error."""
        with pytest.raises(EvaluationError):
            render_plots(tmp_path)

    def test_identical_records_identical_bytes(self, tmp_path: Path):
        """Two run directories with the same records render the same PNG bytes."""
        report = EvaluationReport.from_matrix(
            "xfer-only", confusion(["D", "P", "P"], ["D", "D", "P"], CATALOG), "tiny-cnn-e10"
        )
        outputs = []
        for name in ("a", "b"):
            run_dir = tmp_path / name
            write_jsonl(run_dir / METRICS_FILE, [{"run_id": "r1", **report.to_dict()}])
            outputs.append({p.name: p.read_bytes() for p in render_plots(run_dir)})
        assert outputs[0]
        assert outputs[0] == outputs[1]
