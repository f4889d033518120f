"""CLI entry point for Wound Augment."""

from wound_augment.cli.main import main

__all__ = ["main"]
