"""Confusion matrices, per-class precision/recall/F1 and condition comparison.

The comparison table follows the study's layout: one row per class, one
column group (precision, recall, F1) per condition, and the F1 change of
every condition against the first one in absolute points.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy as np

from wound_augment.core.config import ClassLabel
from wound_augment.core.exceptions import EvaluationError

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

LabelLike = ClassLabel | str


def _as_label(value: LabelLike) -> ClassLabel:
    try:
        return ClassLabel(value)
    except ValueError as e:
        raise EvaluationError(f"Unknown class label {value!r}") from e


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: NDArray[np.int64]
    labels: tuple[ClassLabel, ...]

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if counts.shape != (k, k):
            raise EvaluationError(f"Confusion counts must be {k}x{k}, got {counts.shape}")
        if (counts < 0).any():
            raise EvaluationError("Confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> NDArray[np.int64]:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> NDArray[np.int64]:
        return self.counts.sum(axis=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "labels": [label.value for label in self.labels],
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ConfusionMatrix:
        return cls(
            counts=np.asarray(data["counts"], dtype=np.int64),
            labels=tuple(ClassLabel(code) for code in data["labels"]),
        )


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
        }


def confusion(
    true_labels: Sequence[LabelLike],
    predicted: Sequence[LabelLike],
    catalog: Sequence[ClassLabel],
) -> ConfusionMatrix:
    """Count (true, predicted) pairs over ``catalog``.

    Raises:
        EvaluationError: On a length mismatch or a label outside the catalog.
    """
    if len(true_labels) != len(predicted):
        raise EvaluationError(
            "Label sequences differ in length",
            f"{len(true_labels)} true vs {len(predicted)} predicted",
        )
    index = {label: i for i, label in enumerate(catalog)}
    try:
        rows = np.array([index[_as_label(t)] for t in true_labels], dtype=np.int64)
        cols = np.array([index[_as_label(p)] for p in predicted], dtype=np.int64)
    except KeyError as e:
        raise EvaluationError(f"Label {e.args[0]} not in catalog") from e

    counts = np.zeros((len(catalog), len(catalog)), dtype=np.int64)
    np.add.at(counts, (rows, cols), 1)
    return ConfusionMatrix(counts, tuple(catalog))


def metrics(cm: ConfusionMatrix) -> tuple[dict[ClassLabel, ClassMetrics], float]:
    """Per-class precision, recall, F1 and overall accuracy.

    Zero denominators yield 0 rather than NaN.

    Raises:
        EvaluationError: If the matrix holds no samples.
    """
    total = cm.total
    if total == 0:
        raise EvaluationError("Cannot compute metrics for an empty confusion matrix")

    diagonal = np.diag(cm.counts)
    col_sums = cm.col_sums
    row_sums = cm.row_sums
    per_class: dict[ClassLabel, ClassMetrics] = {}
    for i, label in enumerate(cm.labels):
        precision = float(diagonal[i] / col_sums[i]) if col_sums[i] else 0.0
        recall = float(diagonal[i] / row_sums[i]) if row_sums[i] else 0.0
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
            support=int(row_sums[i]),
        )
    accuracy = float(diagonal.sum() / total)
    return per_class, accuracy


# =============================================================================
# Reports
# =============================================================================


@dataclass(frozen=True)
class EvaluationReport:
    """Test-set evaluation of one trained model under one condition."""

    condition: str
    matrix: ConfusionMatrix
    per_class: dict[ClassLabel, ClassMetrics]
    accuracy: float
    config_label: str | None = None
    train_accuracy: float | None = None

    @classmethod
    def from_matrix(
        cls,
        condition: str,
        matrix: ConfusionMatrix,
        config_label: str | None = None,
        train_accuracy: float | None = None,
    ) -> EvaluationReport:
        per_class, accuracy = metrics(matrix)
        return cls(condition, matrix, per_class, accuracy, config_label, train_accuracy)

    @property
    def labels(self) -> tuple[ClassLabel, ...]:
        return self.matrix.labels

    @property
    def support(self) -> dict[ClassLabel, int]:
        return {label: m.support for label, m in self.per_class.items()}

    @property
    def overfitting_gap(self) -> float | None:
        """Train accuracy minus test accuracy, when train accuracy is known."""
        if self.train_accuracy is None:
            return None
        return self.train_accuracy - self.accuracy

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "config": self.config_label,
            "accuracy": self.accuracy,
            "train_accuracy": self.train_accuracy,
            "per_class": {label.value: m.to_dict() for label, m in self.per_class.items()},
            "confusion": self.matrix.to_dict(),
        }

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> EvaluationReport:
        matrix = ConfusionMatrix.from_dict(record["confusion"])
        per_class = {
            ClassLabel(code): ClassMetrics(**values)
            for code, values in record["per_class"].items()
        }
        return cls(
            condition=record["condition"],
            matrix=matrix,
            per_class=per_class,
            accuracy=float(record["accuracy"]),
            config_label=record.get("config"),
            train_accuracy=record.get("train_accuracy"),
        )


def best_report(reports: Sequence[EvaluationReport]) -> EvaluationReport:
    """Highest-accuracy report; the earliest wins ties."""
    if not reports:
        raise EvaluationError("No reports to choose from")
    return max(reports, key=lambda r: r.accuracy)


# =============================================================================
# Comparison
# =============================================================================


@dataclass(frozen=True)
class ComparisonTable:
    """Per-class metrics of several conditions, first report as baseline."""

    reports: tuple[EvaluationReport, ...]
    labels: tuple[ClassLabel, ...]
    deltas: dict[str, dict[ClassLabel, float]] = field(default_factory=dict)

    @property
    def conditions(self) -> list[str]:
        return [r.condition for r in self.reports]

    @property
    def baseline(self) -> EvaluationReport:
        return self.reports[0]

    def f1_delta(self, condition: str, label: ClassLabel) -> float:
        return self.deltas[condition][label]

    def render_text(self) -> str:
        """Fixed-width table, two decimals, signed F1 deltas."""
        name_width = max(len("Accuracy"), *(len(label.display_name) for label in self.labels))
        group_width = 24

        header = ["Class".ljust(name_width)]
        subheader = ["".ljust(name_width)]
        for i, report in enumerate(self.reports):
            header.append(report.condition.ljust(group_width))
            sub = "P     R     F1"
            if i > 0:
                sub += "    dF1"
            subheader.append(sub.ljust(group_width))
        lines = [" | ".join(header).rstrip(), " | ".join(subheader).rstrip()]
        lines.append("-" * len(lines[0]))

        for label in self.labels:
            row = [label.display_name.ljust(name_width)]
            for i, report in enumerate(self.reports):
                m = report.per_class[label]
                cell = f"{m.precision:.2f}  {m.recall:.2f}  {m.f1:.2f}"
                if i > 0:
                    cell += f"  {self.deltas[report.condition][label]:+.2f}"
                row.append(cell.ljust(group_width))
            lines.append(" | ".join(row).rstrip())

        accuracy_row = ["Accuracy".ljust(name_width)]
        for report in self.reports:
            accuracy_row.append(f"{report.accuracy:.2f}".ljust(group_width))
        lines.append(" | ".join(accuracy_row).rstrip())
        return "\n".join(lines) + "\n"

    def to_records(self) -> list[dict[str, Any]]:
        """One record per (condition, class), full precision."""
        records: list[dict[str, Any]] = []
        for i, report in enumerate(self.reports):
            for label in self.labels:
                m = report.per_class[label]
                records.append({
                    "condition": report.condition,
                    "config": report.config_label,
                    "label": label.value,
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "delta_f1": 0.0 if i == 0 else self.deltas[report.condition][label],
                    "accuracy": report.accuracy,
                })
        return records


def compare(reports: Sequence[EvaluationReport]) -> ComparisonTable:
    """Compare conditions against the first report.

    Raises:
        EvaluationError: Fewer than two reports, catalogs differ, or a condition
            name repeats.
    """
    if len(reports) < 2:
        raise EvaluationError("Comparison needs at least two reports", f"got {len(reports)}")
    labels = reports[0].labels
    for report in reports[1:]:
        if report.labels != labels:
            raise EvaluationError(
                "Reports use different class catalogs",
                f"{report.condition}: {[label.value for label in report.labels]}",
            )

    names = [r.condition for r in reports]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise EvaluationError("Condition names must be unique", ", ".join(duplicates))

    baseline = reports[0]
    deltas = {
        report.condition: {
            label: report.per_class[label].f1 - baseline.per_class[label].f1 for label in labels
        }
        for report in reports[1:]
    }
    return ComparisonTable(tuple(reports), labels, deltas)
