"""Evaluation metrics and condition comparison."""

from wound_augment.eval.metrics import (
    ClassMetrics,
    ComparisonTable,
    ConfusionMatrix,
    EvaluationReport,
    best_report,
    compare,
    confusion,
    metrics,
)

__all__ = [
    "ClassMetrics",
    "ComparisonTable",
    "ConfusionMatrix",
    "EvaluationReport",
    "best_report",
    "compare",
    "confusion",
    "metrics",
]
