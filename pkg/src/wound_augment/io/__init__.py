"""Results index and figure output."""

from wound_augment.io.results import ResultsIndex, RunRecord, read_jsonl, write_jsonl

__all__ = ["ResultsIndex", "RunRecord", "read_jsonl", "write_jsonl"]
