"""Rich terminal UI components for the augmentation study."""

from wound_augment.ui.display import (
    display_comparison,
    display_findings,
    display_grid,
    display_records,
    display_report,
    print_banner,
    print_error,
    print_success,
    print_warning,
)

__all__ = [
    "display_comparison",
    "display_findings",
    "display_grid",
    "display_records",
    "display_report",
    "print_banner",
    "print_error",
    "print_success",
    "print_warning",
]
