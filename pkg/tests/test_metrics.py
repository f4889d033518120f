"""Tests for confusion matrices, metrics and condition comparison."""

from __future__ import annotations

import numpy as np
import pytest

from wound_augment.core.config import DEFAULT_CATALOG, ClassLabel
from wound_augment.core.exceptions import EvaluationError
from wound_augment.eval.metrics import (
    ClassMetrics,
    ConfusionMatrix,
    EvaluationReport,
    best_report,
    compare,
    confusion,
    f1_score,
    metrics,
)

CATALOG = (ClassLabel.D, ClassLabel.P, ClassLabel.V)


def _report(condition: str, true: list[str], predicted: list[str]) -> EvaluationReport:
    return EvaluationReport.from_matrix(condition, confusion(true, predicted, CATALOG))


class TestF1:
    """Tests for the harmonic mean."""

    @pytest.mark.parametrize(
        ("precision", "recall", "expected"),
        [(0.69, 0.64, 0.67), (0.56, 0.64, 0.60), (0.85, 0.79, 0.81)],
    )
    def test_published_pairs(self, precision: float, recall: float, expected: float):
        """Two-decimal precision/recall pairs reproduce reported F1 within rounding."""
        assert f1_score(precision, recall) == pytest.approx(expected, abs=0.01)

    def test_zero(self):
        """Zero precision and recall give zero."""
        assert f1_score(0.0, 0.0) == 0.0

    def test_perfect(self):
        """Perfect precision and recall give one."""
        assert f1_score(1.0, 1.0) == 1.0


class TestConfusion:
    """Tests for confusion counting."""

    def test_counts(self):
        """Rows are true labels, columns predictions."""
        cm = confusion(["D", "D", "P", "V"], ["D", "P", "P", "D"], CATALOG)
        expected = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 0]])
        np.testing.assert_array_equal(cm.counts, expected)
        assert cm.total == 4

    def test_length_mismatch(self):
        """Sequences must have equal length."""
        with pytest.raises(EvaluationError):
            confusion(["D"], ["D", "P"], CATALOG)

    def test_label_outside_catalog(self):
        """Labels must belong to the catalog."""
        with pytest.raises(EvaluationError):
            confusion(["S"], ["D"], CATALOG)

    def test_unknown_label(self):
        """Strings that are not class codes are rejected."""
        with pytest.raises(EvaluationError):
            confusion(["X"], ["D"], CATALOG)

    def test_bad_matrix(self):
        """Matrices must be square over the labels and non-negative."""
        with pytest.raises(EvaluationError):
            ConfusionMatrix(np.zeros((2, 3), dtype=np.int64), CATALOG)
        with pytest.raises(EvaluationError):
            ConfusionMatrix(-np.eye(3, dtype=np.int64), CATALOG)

    def test_dict_round_trip(self):
        """to_dict/from_dict preserve counts and labels."""
        cm = confusion(["D", "P"], ["P", "P"], CATALOG)
        again = ConfusionMatrix.from_dict(cm.to_dict())
        np.testing.assert_array_equal(again.counts, cm.counts)
        assert again.labels == cm.labels


class TestMetrics:
    """Tests for per-class metrics."""

    def test_brute_force_oracle(self):
        """Metrics match a direct count over 1000 random predictions."""
        rng = np.random.default_rng(0)
        codes = [label.value for label in DEFAULT_CATALOG]
        true = [codes[i] for i in rng.integers(0, 6, size=1000)]
        predicted = [codes[i] for i in rng.integers(0, 6, size=1000)]
        per_class, accuracy = metrics(confusion(true, predicted, DEFAULT_CATALOG))

        matches = [t == p for t, p in zip(true, predicted, strict=True)]
        assert accuracy == pytest.approx(np.mean(matches))
        for label in DEFAULT_CATALOG:
            c = label.value
            tp = sum(t == c and p == c for t, p in zip(true, predicted, strict=True))
            fp = sum(t != c and p == c for t, p in zip(true, predicted, strict=True))
            fn = sum(t == c and p != c for t, p in zip(true, predicted, strict=True))
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            m = per_class[label]
            assert m.precision == pytest.approx(precision)
            assert m.recall == pytest.approx(recall)
            assert m.f1 == pytest.approx(f1_score(precision, recall))
            assert m.support == tp + fn

    def test_never_predicted_class(self):
        """A class never predicted gets precision 0, not NaN."""
        per_class, _ = metrics(confusion(["D", "P"], ["D", "D"], CATALOG))
        assert per_class[ClassLabel.P].precision == 0.0
        assert per_class[ClassLabel.P].f1 == 0.0
        assert per_class[ClassLabel.V].support == 0

    def test_empty(self):
        """An empty matrix cannot be summarized."""
        with pytest.raises(EvaluationError):
            metrics(ConfusionMatrix(np.zeros((3, 3), dtype=np.int64), CATALOG))


class TestReports:
    """Tests for evaluation reports."""

    def test_dict_round_trip(self):
        """Reports survive to_dict/from_dict."""
        report = EvaluationReport.from_matrix(
            "degan-aug", confusion(["D", "P", "V"], ["D", "V", "V"], CATALOG), "tiny", 0.9
        )
        record = report.to_dict()
        assert set(record) == {
            "condition", "config", "accuracy", "train_accuracy", "per_class", "confusion",
        }
        again = EvaluationReport.from_dict(record)
        assert again.accuracy == report.accuracy
        assert again.per_class == report.per_class
        assert again.config_label == "tiny"

    def test_overfitting_gap(self):
        """The gap is train minus test accuracy."""
        report = EvaluationReport.from_matrix(
            "x", confusion(["D", "P"], ["D", "D"], CATALOG), train_accuracy=1.0
        )
        assert report.overfitting_gap == pytest.approx(0.5)
        assert _report("y", ["D"], ["D"]).overfitting_gap is None

    def test_best_report_first_wins_ties(self):
        """Ties go to the earliest report."""
        a = _report("a", ["D", "P"], ["D", "D"])
        b = _report("b", ["D", "P"], ["P", "P"])
        c = _report("c", ["D", "P"], ["D", "P"])
        assert best_report([a, b]) is a
        assert best_report([a, b, c]) is c
        with pytest.raises(EvaluationError):
            best_report([])


class TestCompare:
    """Tests for condition comparison."""

    def test_deltas_against_first(self):
        """F1 deltas are measured against the first report."""
        base = _report("xfer-only", ["D", "P", "V", "V"], ["D", "D", "V", "P"])
        better = _report("degan-aug", ["D", "P", "V", "V"], ["D", "P", "V", "V"])
        table = compare([base, better])
        for label in CATALOG:
            expected = better.per_class[label].f1 - base.per_class[label].f1
            assert table.f1_delta("degan-aug", label) == pytest.approx(expected)
        assert table.conditions == ["xfer-only", "degan-aug"]
        assert table.baseline is base

    def test_render_text(self):
        """The text table has one row per class plus accuracy."""
        base = _report("xfer-only", ["D", "P", "V"], ["D", "D", "V"])
        other = _report("geometric-aug", ["D", "P", "V"], ["D", "P", "V"])
        text = compare([base, other]).render_text()
        assert "xfer-only" in text
        assert "geometric-aug" in text
        assert "Accuracy" in text
        assert ClassLabel.P.display_name in text
        assert "+1.00" in text

    def test_records(self):
        """One record per condition and class."""
        base = _report("a", ["D", "P", "V"], ["D", "D", "V"])
        other = _report("b", ["D", "P", "V"], ["D", "P", "V"])
        records = compare([base, other]).to_records()
        assert len(records) == 6
        assert all(r["delta_f1"] == 0.0 for r in records if r["condition"] == "a")

    def test_needs_two_reports(self):
        """A single report cannot be compared."""
        with pytest.raises(EvaluationError):
            compare([_report("a", ["D"], ["D"])])

    def test_catalog_mismatch(self):
        """Reports must share a catalog."""
        other = EvaluationReport.from_matrix(
            "b", confusion(["D"], ["D"], (ClassLabel.D, ClassLabel.P))
        )
        with pytest.raises(EvaluationError):
            compare([_report("a", ["D"], ["D"]), other])

    def test_duplicate_conditions_rejected(self):
        """Two reports with one condition name cannot share a delta column."""
        a = _report("geometric-aug", ["D", "P"], ["D", "P"])
        b = _report("geometric-aug", ["D", "P"], ["P", "P"])
        with pytest.raises(EvaluationError) as exc_info:
            compare([_report("xfer-only", ["D"], ["D"]), a, b])
        assert "geometric-aug" in str(exc_info.value)

    def test_published_f1_columns(self):
        """Baseline and geometric F1 columns give +0.10 (D), +0.11 (P) and +0.07 (V)."""
        matrix = ConfusionMatrix(np.eye(3, dtype=np.int64), CATALOG)

        def from_f1(condition: str, f1: dict[ClassLabel, float]) -> EvaluationReport:
            per_class = {label: ClassMetrics(value, value, value) for label, value in f1.items()}
            return EvaluationReport(condition, matrix, per_class, accuracy=1.0)

        base = from_f1("xfer-only", {ClassLabel.D: 0.67, ClassLabel.P: 0.60, ClassLabel.V: 0.80})
        geo = from_f1(
            "geometric-aug", {ClassLabel.D: 0.77, ClassLabel.P: 0.71, ClassLabel.V: 0.87}
        )
        table = compare([base, geo])
        expected = {ClassLabel.D: 0.10, ClassLabel.P: 0.11, ClassLabel.V: 0.07}
        for label, delta in expected.items():
            assert table.f1_delta("geometric-aug", label) == pytest.approx(delta, abs=1e-9)
        text = table.render_text()
        for cell in ("+0.10", "+0.11", "+0.07"):
            assert cell in text
