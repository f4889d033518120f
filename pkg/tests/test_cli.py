"""Tests for the woundaug command line."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from unittest.mock import patch

import pytest

from wound_augment.cli.main import build_parser, main
from wound_augment.data.manifest import read_manifest_records

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

SUBCOMMANDS = [
    "ingest",
    "balance",
    "split",
    "augment",
    "gan-train",
    "gan-generate",
    "train",
    "evaluate",
    "compare",
    "run",
    "plot",
    "validate",
]


def _run(*argv: str) -> int:
    """Invoke main() and return its exit code."""
    with pytest.raises(SystemExit) as exc_info:
        main(list(argv))
    code = exc_info.value.code
    return 0 if code is None else int(code)


@pytest.fixture
def split_manifest(synthetic_tree: Path, tmp_path: Path) -> Path:
    """ingest -> split, returning the train/test manifest."""
    all_manifest = tmp_path / "all.jsonl"
    assert _run("ingest", str(synthetic_tree), "-o", str(all_manifest)) == 0
    out = tmp_path / "split.jsonl"
    assert _run("split", str(all_manifest), "-o", str(out), "--seed", "1") == 0
    return out


class TestCLIArguments:
    """Test CLI argument parsing."""

    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_subcommand_help(self, command: str):
        """Every subcommand prints help and exits 0."""
        with patch.object(sys, "argv", ["woundaug", command, "--help"]):
            with pytest.raises(SystemExit) as exc_info:
                main()
            assert exc_info.value.code == 0

    def test_requires_command(self):
        """A missing subcommand is a usage error."""
        with pytest.raises(SystemExit) as exc_info:
            main([])
        assert exc_info.value.code == 2

    def test_common_options(self):
        """Every subcommand accepts the shared options."""
        args = build_parser().parse_args(
            ["plot", "runs/x", "--config", "c.yaml", "--set", "a=1", "--seed", "3", "-v"]
        )
        assert args.config == "c.yaml"
        assert args.set == ["a=1"]
        assert args.seed == 3
        assert args.verbose

    def test_train_defaults(self):
        """Head training defaults match the desk regimen."""
        args = build_parser().parse_args(["train", "m.jsonl", "-o", "model"])
        assert args.epochs == 30
        assert args.lr == 0.001
        assert args.batch_size == 16
        assert args.backbone == "tiny-cnn"


class TestDataCommands:
    """ingest, balance, split and augment."""

    def test_ingest(self, synthetic_tree: Path, tmp_path: Path, capsys: pytest.CaptureFixture):
        """Ingest writes one record per image."""
        out = tmp_path / "all.jsonl"
        assert _run("ingest", str(synthetic_tree), "-o", str(out)) == 0
        assert len(read_manifest_records(out)) == 36
        assert "Ingested 36 images" in capsys.readouterr().out

    def test_ingest_missing_class(self, tmp_path: Path, capsys: pytest.CaptureFixture):
        """A tree without class directories fails with an error message."""
        (tmp_path / "tree" / "D").mkdir(parents=True)
        assert _run("ingest", str(tmp_path / "tree"), "-o", str(tmp_path / "m.jsonl")) == 1
        assert "Error:" in capsys.readouterr().err

    def test_balance(self, synthetic_tree: Path, tmp_path: Path):
        """Balancing caps every class."""
        all_manifest = tmp_path / "all.jsonl"
        _run("ingest", str(synthetic_tree), "-o", str(all_manifest))
        out = tmp_path / "balanced.jsonl"
        assert _run("balance", str(all_manifest), "-o", str(out), "--per-class", "4") == 0
        assert len(read_manifest_records(out)) == 24

    def test_balance_strict(self, synthetic_tree: Path, tmp_path: Path):
        """Strict balancing fails on small classes."""
        all_manifest = tmp_path / "all.jsonl"
        _run("ingest", str(synthetic_tree), "-o", str(all_manifest))
        code = _run(
            "balance", str(all_manifest), "-o", str(tmp_path / "b.jsonl"),
            "--per-class", "10", "--strict",
        )
        assert code == 1

    def test_split(self, split_manifest: Path):
        """Split writes train and test records."""
        splits = {r["split"] for r in read_manifest_records(split_manifest)}
        assert splits == {"train", "test"}

    def test_augment(self, split_manifest: Path, tmp_path: Path):
        """Augment replaces the train split and keeps the test split."""
        out = tmp_path / "aug.jsonl"
        code = _run("augment", str(split_manifest), "-o", str(out), "--rotation", "15",
                    "--concatenate", "--seed", "2")
        assert code == 0
        records = read_manifest_records(out)
        origins = {r["origin"] for r in records if r["split"] == "train"}
        assert origins == {"real", "geometric-aug"}
        assert {r["origin"] for r in records if r["split"] == "test"} == {"real"}

    def test_augment_unknown_split(self, split_manifest: Path, tmp_path: Path):
        """Augmenting a split that is not in the manifest fails."""
        out = tmp_path / "aug.jsonl"
        assert _run("augment", str(split_manifest), "-o", str(out), "--split", "val") == 1


class TestModelCommands:
    """train, evaluate, compare and the DE-GAN commands."""

    def test_train_evaluate_compare(self, split_manifest: Path, tmp_path: Path):
        """A trained head evaluates into reports that compare."""
        model_dir = tmp_path / "model"
        code = _run("train", str(split_manifest), "-o", str(model_dir),
                    "--epochs", "3", "--lr", "0.05")
        assert code == 0
        assert (model_dir / "model.json").is_file()

        first = tmp_path / "xfer.json"
        second = tmp_path / "geo.json"
        assert _run("evaluate", str(model_dir), str(split_manifest), "-o", str(first)) == 0
        assert _run("evaluate", str(model_dir), str(split_manifest), "-o", str(second),
                    "--condition", "geometric-aug") == 0
        assert json.loads(first.read_text())["condition"] == "xfer-only"

        table = tmp_path / "table.txt"
        assert _run("compare", str(first), str(second), "-o", str(table)) == 0
        assert "geometric-aug" in table.read_text()

    def test_compare_needs_two(self, tmp_path: Path):
        """A single report cannot be compared."""
        report = tmp_path / "r.jsonl"
        report.write_text("")
        assert _run("compare", str(report)) == 1

    def test_gan_train_and_generate(self, split_manifest: Path, tmp_path: Path):
        """A class GAN trains and samples into a manifest."""
        gan_dir = tmp_path / "gan"
        code = _run("gan-train", str(split_manifest), "-o", str(gan_dir),
                    "--label", "D", "--epochs", "2")
        assert code == 0
        assert (gan_dir / "gan.json").is_file()

        out = tmp_path / "gen.jsonl"
        assert _run("gan-generate", str(gan_dir), "-o", str(out), "-n", "3") == 0
        records = read_manifest_records(out)
        assert len(records) == 3
        assert {r["origin"] for r in records} == {"gan-synthetic"}
        assert {r["label"] for r in records} == {"D"}

    def test_gan_generate_curate(self, split_manifest: Path, tmp_path: Path):
        """Curation writes candidates and a numbered sheet."""
        gan_dir = tmp_path / "gan"
        _run("gan-train", str(split_manifest), "-o", str(gan_dir), "--epochs", "1")
        out = tmp_path / "candidates.jsonl"
        assert _run("gan-generate", str(gan_dir), "-o", str(out), "--curate", "5") == 0
        assert len(read_manifest_records(out)) == 5
        assert out.with_suffix(".png").is_file()


class TestExperimentCommands:
    """validate, run and plot."""

    def test_validate_desk(self, capsys: pytest.CaptureFixture):
        """The desk profile validates."""
        assert _run("validate", "--config", str(CONFIG_DIR / "desk.yaml"), "--json") == 0
        out = capsys.readouterr().out
        findings = json.loads(out[out.index("[\n"):])
        assert {f["key"] for f in findings} == {"grid.lr_list.0", "grid.lr_list.1"}
        assert {f["severity"] for f in findings} == {"warning"}

    def test_validate_errors(self, tmp_path: Path):
        """Config errors exit 1."""
        path = tmp_path / "bad.yaml"
        path.write_text("name: x\nconditions: []\n")
        assert _run("validate", "--config", str(path)) == 1

    def test_validate_needs_config(self, capsys: pytest.CaptureFixture):
        """validate without --config is an error."""
        assert _run("validate") == 1
        assert "needs --config" in capsys.readouterr().err

    def test_run_needs_config(self, capsys: pytest.CaptureFixture):
        """run without --config is an error."""
        assert _run("run") == 1
        assert "needs --config" in capsys.readouterr().err

    def test_set_needs_config(self, tmp_path: Path, capsys: pytest.CaptureFixture):
        """--set without --config is an error."""
        assert _run("train", "m.jsonl", "-o", str(tmp_path / "m"), "--set", "a=1") == 1
        assert "--set needs --config" in capsys.readouterr().err

    def test_bad_override(self, tmp_path: Path):
        """Malformed overrides are reported."""
        code = _run("validate", "--config", str(CONFIG_DIR / "desk.yaml"), "--set", "noequals")
        assert code == 1

    def test_plot_empty(self, tmp_path: Path):
        """Plotting an empty run directory fails."""
        assert _run("plot", str(tmp_path)) == 1

    def _tiny_run_config(self, tmp_path: Path) -> Path:
        raw = {
            "name": "cli",
            "synthetic": {"per_class": 6, "seed": 0},
            "shape": [16, 16, 3],
            "balance_per_class": 6,
            "output_dir": str(tmp_path / "out"),
            "grid": {
                "backbones": [{"name": "tiny-cnn"}],
                "epochs_list": [2],
                "lr_list": [0.01],
                "early_stop_patience": None,
            },
            "conditions": [{"name": "xfer-only"}, {"name": "geometric-aug"}],
        }
        path = tmp_path / "run.yaml"
        path.write_text(json.dumps(raw))
        return path

    def test_run_succeeds(self, tmp_path: Path, capsys: pytest.CaptureFixture):
        """A small run exits 0 and writes its figures."""
        assert _run("run", "--config", str(self._tiny_run_config(tmp_path))) == 0
        out = capsys.readouterr().out
        assert "tiny-cnn" in out
        assert (tmp_path / "out" / "figures").is_dir()

    def test_run_fails_when_plots_fail(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch, capsys: pytest.CaptureFixture
    ):
        """A figure rendering error makes the run exit 1."""

        def broken_plots(*args, **kwargs):
            raise RuntimeError("no backend")

        monkeypatch.setattr("wound_augment.apps.pipeline.render_plots", broken_plots)
        assert _run("run", "--config", str(self._tiny_run_config(tmp_path))) == 1
        assert "Plot rendering failed: no backend" in capsys.readouterr().out
