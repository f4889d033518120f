"""Rich terminal display functions for the augmentation study."""

from __future__ import annotations

from collections.abc import Sequence
from typing import TYPE_CHECKING

try:
    from rich.console import Console
    from rich.panel import Panel
    from rich.table import Table
    from rich.text import Text

    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

if TYPE_CHECKING:
    from wound_augment.apps.grid import GridPointResult
    from wound_augment.apps.pipeline import Finding
    from wound_augment.eval.metrics import ComparisonTable, EvaluationReport
    from wound_augment.io.results import RunRecord


# Global console instance
_console: Console | None = None


def get_console() -> Console:
    """Get the global rich console instance."""
    global _console
    if _console is None:
        if RICH_AVAILABLE:
            _console = Console()
        else:
            raise ImportError("rich library not installed. Install with: pip install rich")
    return _console


def print_banner(title: str, subtitle: str | None = None) -> None:
    """Print a styled banner.

    Args:
        title: Main title text.
        subtitle: Optional subtitle.
    """
    if not RICH_AVAILABLE:
        print(f"\n{'=' * 50}")
        print(f"  {title}")
        if subtitle:
            print(f"  {subtitle}")
        print(f"{'=' * 50}\n")
        return

    console = get_console()
    text = Text(title, style="bold cyan")
    if subtitle:
        text.append(f"\n{subtitle}", style="dim")
    console.print(Panel(text, border_style="cyan"))


def print_success(message: str) -> None:
    if not RICH_AVAILABLE:
        print(f"[OK] {message}")
        return
    get_console().print(f"[bold green]✓[/] {message}")


def print_warning(message: str) -> None:
    if not RICH_AVAILABLE:
        print(f"[WARNING] {message}")
        return
    get_console().print(f"[bold yellow]⚠[/] {message}")


def print_error(message: str) -> None:
    if not RICH_AVAILABLE:
        print(f"[ERROR] {message}")
        return
    get_console().print(f"[bold red]✗[/] {message}")


def _delta_style(delta: float) -> str:
    if delta > 0:
        return "green"
    if delta < 0:
        return "red"
    return "dim"


def display_comparison(table: ComparisonTable) -> None:
    """Per-class precision, recall and F1 of every condition, with F1 deltas.

    Args:
        table: Comparison built by ``compare``; its first report is the baseline.
    """
    if not RICH_AVAILABLE:
        print(table.render_text())
        return

    console = get_console()
    out = Table(title="Condition comparison", show_lines=False)
    out.add_column("Class", style="bold")
    for i, report in enumerate(table.reports):
        header = report.condition if i == 0 else f"{report.condition} (dF1)"
        out.add_column(header, justify="right")

    for label in table.labels:
        cells: list[str | Text] = [label.display_name]
        for i, report in enumerate(table.reports):
            m = report.per_class[label]
            cell = Text(f"{m.precision:.2f} / {m.recall:.2f} / {m.f1:.2f}")
            if i > 0:
                delta = table.f1_delta(report.condition, label)
                cell.append(f"  {delta:+.2f}", style=_delta_style(delta))
            cells.append(cell)
        out.add_row(*cells)

    out.add_row("Accuracy", *(f"{r.accuracy:.2f}" for r in table.reports), style="cyan")
    console.print(out)
    console.print("[dim]cells: precision / recall / F1[/]")


def display_report(report: EvaluationReport) -> None:
    """One condition's per-class metrics and confusion matrix."""
    codes = [label.value for label in report.labels]
    if not RICH_AVAILABLE:
        print(f"\n{report.condition}  accuracy={report.accuracy:.3f}")
        for label, m in report.per_class.items():
            print(f"  {label.value}  P={m.precision:.2f} R={m.recall:.2f} F1={m.f1:.2f}")
        print("  confusion (rows true, cols predicted): " + " ".join(codes))
        for code, row in zip(codes, report.matrix.counts.tolist(), strict=True):
            print(f"  {code}  " + " ".join(f"{v:3d}" for v in row))
        return

    console = get_console()
    title = f"{report.condition} | accuracy {report.accuracy:.3f}"
    if report.config_label:
        title += f" | {report.config_label}"
    metrics_table = Table(title=title)
    metrics_table.add_column("Class", style="bold")
    for name in ("Precision", "Recall", "F1", "Support"):
        metrics_table.add_column(name, justify="right")
    for label, m in report.per_class.items():
        metrics_table.add_row(
            label.display_name,
            f"{m.precision:.2f}",
            f"{m.recall:.2f}",
            f"{m.f1:.2f}",
            str(m.support),
        )
    console.print(metrics_table)

    matrix_table = Table(title="Confusion (rows true, columns predicted)")
    matrix_table.add_column("")
    for code in codes:
        matrix_table.add_column(code, justify="right")
    for code, row in zip(codes, report.matrix.counts.tolist(), strict=True):
        matrix_table.add_row(code, *(str(v) for v in row))
    console.print(matrix_table)

    gap = report.overfitting_gap
    if gap is not None and gap > 0.2:
        print_warning(f"Train accuracy exceeds test accuracy by {gap:.2f}")


def display_grid(results: Sequence[GridPointResult], max_rows: int = 20) -> None:
    """Grid points ordered as returned by ``run_grid`` (best first).

    Args:
        results: Grid results.
        max_rows: Rows to show before truncating.
    """
    shown = list(results)[:max_rows]
    if not RICH_AVAILABLE:
        print(f"\nGrid: {len(results)} points")
        for r in shown:
            status = f"acc={r.accuracy:.3f}" if r.success else f"FAILED ({r.error})"
            print(f"  {r.config.label():40} {status}")
        return

    console = get_console()
    table = Table(title=f"Transfer-learning grid ({len(results)} points)")
    table.add_column("#", justify="right", style="dim")
    table.add_column("Backbone")
    table.add_column("Epochs", justify="right")
    table.add_column("LR", justify="right")
    table.add_column("Stopped", justify="right")
    table.add_column("Test acc", justify="right")
    for rank, r in enumerate(shown, 1):
        acc = f"[green]{r.accuracy:.3f}[/]" if r.success else f"[red]failed[/] {r.error or ''}"
        table.add_row(
            str(rank),
            r.config.backbone.name.value,
            str(r.config.epochs),
            f"{r.config.learning_rate:g}",
            "-" if r.stopped_epoch is None else str(r.stopped_epoch),
            acc,
        )
    console.print(table)
    if len(results) > max_rows:
        console.print(f"[dim]... and {len(results) - max_rows} more points[/]")


def display_records(records: Sequence[RunRecord]) -> None:
    """Summary line per condition run."""
    for record in records:
        if record.success:
            print_success(
                f"{record.condition}: accuracy {record.accuracy:.3f} ({record.config_label})"
            )
        else:
            print_error(f"{record.condition}: {record.error}")


def display_findings(findings: Sequence[Finding]) -> None:
    """Config validation findings, errors first."""
    if not findings:
        print_success("Configuration is valid")
        return
    ordered = sorted(findings, key=lambda f: f.severity.value != "error")
    for finding in ordered:
        text = f"{finding.key}: {finding.message}"
        if finding.severity.value == "error":
            print_error(text)
        else:
            print_warning(text)
