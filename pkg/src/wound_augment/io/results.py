"""Append-only JSON Lines index of experiment runs.

Each line is one ``RunRecord``. The index is read back on startup so that a
rerun skips runs that already completed successfully.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from collections.abc import Iterable
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.jsonl"
METRICS_FILE = "metrics.jsonl"


def make_run_id(*parts: str) -> str:
    """Stable 16-hex-digit id from the parts that define a run."""
    digest = hashlib.sha256("\x1f".join(parts).encode()).hexdigest()
    return digest[:16]


@dataclass
class RunRecord:
    """One classifier run (grid point or condition retrain)."""

    run_id: str
    stage: str
    condition: str
    config_label: str
    config: dict[str, Any]
    success: bool
    error: str | None = None
    report: dict[str, Any] | None = None
    stopped_epoch: int | None = None
    duration_seconds: float | None = None
    dataset_hash: str | None = None
    artifacts: dict[str, str] = field(default_factory=dict)
    notes: dict[str, Any] = field(default_factory=dict)
    timestamp: str = field(default_factory=lambda: datetime.now().isoformat())

    @property
    def accuracy(self) -> float | None:
        return None if self.report is None else float(self.report["accuracy"])

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunRecord:
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


class ResultsIndex:
    """Results index backed by a JSON Lines file.

    Writes are serialized with a lock so grid workers can share one index.
    """

    def __init__(self, path: str | Path, enabled: bool = True) -> None:
        """Initialize the index.

        Args:
            path: Path to the ``results.jsonl`` file.
            enabled: When False, records are kept in memory only.
        """
        self.path = Path(path)
        self.enabled = enabled
        self._lock = threading.Lock()
        self._records: dict[str, RunRecord] = {}
        if self.enabled:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            for record in self._read():
                self._records[record.run_id] = record

    def _read(self) -> list[RunRecord]:
        if not self.path.exists():
            return []
        records: list[RunRecord] = []
        with open(self.path) as f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(RunRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, TypeError) as e:
                    logger.warning("Skipping bad line %d in %s: %s", line_no, self.path, e)
        return records

    def append(self, record: RunRecord) -> RunRecord:
        with self._lock:
            self._records[record.run_id] = record
            if self.enabled:
                try:
                    with open(self.path, "a") as f:
                        f.write(record.to_json() + "\n")
                except OSError as e:
                    logger.warning("Failed to write results index: %s", e)
        return record

    def completed(self, run_id: str) -> RunRecord | None:
        """Latest successful record for ``run_id``, if any."""
        record = self._records.get(run_id)
        return record if record is not None and record.success else None

    def records(self, stage: str | None = None) -> list[RunRecord]:
        """Latest record per run id, in first-seen order."""
        return [r for r in self._records.values() if stage is None or r.stage == stage]

    def __len__(self) -> int:
        return len(self._records)


def write_jsonl(path: str | Path, rows: Iterable[dict[str, Any]]) -> Path:
    """Overwrite ``path`` with one sorted-key JSON object per line."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    return out


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
