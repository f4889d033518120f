"""Line-delimited dataset manifests.

One JSON object per sample, keys sorted::

    {"label": "D", "origin": "real", "path": "../data/D/img_000.png",
     "source_id": "D/img_000.png", "split": "train"}

``path`` is relative to the manifest's directory. Samples without a backing
file (augmented or synthetic) are exported as PNG next to the manifest.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
from PIL import Image

from wound_augment.core.config import DEFAULT_CATALOG, ClassLabel, Origin
from wound_augment.core.exceptions import ManifestError
from wound_augment.data.dataset import ImageSample, LabeledDataset, load_image

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

MANIFEST_KEYS: frozenset[str] = frozenset({"source_id", "label", "origin", "split", "path"})


def safe_filename(source_id: str) -> str:
    """Flatten a source id into a single path component."""
    return source_id.replace("/", "__").replace("\\", "__")


def save_png(pixels: NDArray[np.float32], path: Path) -> None:
    """Write [0, 1] pixels as an 8-bit PNG."""
    data = np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)
    if data.shape[-1] == 1:
        data = data[:, :, 0]
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data).save(path, format="PNG")


def export_images(samples: Iterable[ImageSample], out_dir: Path | str) -> dict[str, Path]:
    """Write every sample as PNG; returns source_id -> written path."""
    out_dir = Path(out_dir)
    written: dict[str, Path] = {}
    for sample in samples:
        path = out_dir / f"{safe_filename(sample.source_id)}.png"
        save_png(sample.pixels, path)
        written[sample.source_id] = path
    if written:
        logger.info("Exported %d images to %s", len(written), out_dir)
    return written


def write_manifest(
    path: Path | str,
    splits: Mapping[str, LabeledDataset],
    source_root: Path | str | None = None,
    image_dir: Path | str | None = None,
    export: bool = True,
) -> Path:
    """Write a manifest covering one or more named splits.

    Args:
        path: Manifest file to create.
        splits: Split name -> dataset, written in mapping order.
        source_root: Ingest root; real samples found under it are referenced in place.
        image_dir: Where samples without a file are exported (default: ``<manifest>_images``).
        export: If False, file-less samples get ``path: null``.

    Returns:
        Path of the written manifest.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = Path(source_root) if source_root is not None else None
    images = Path(image_dir) if image_dir is not None else path.with_name(f"{path.stem}_images")

    lines: list[str] = []
    for split_name, ds in splits.items():
        in_place = {s.source_id: _source_file(s, root) for s in ds}
        exported: dict[str, Path] = {}
        if export:
            exported = export_images([s for s in ds if in_place[s.source_id] is None], images)
        for sample in ds:
            file_path = in_place[sample.source_id] or exported.get(sample.source_id)
            rel = os.path.relpath(file_path, path.parent) if file_path else None
            record = {
                "source_id": sample.source_id,
                "label": sample.label.value,
                "origin": sample.origin.value,
                "split": split_name,
                "path": Path(rel).as_posix() if rel else None,
            }
            lines.append(json.dumps(record, sort_keys=True))

    path.write_text("".join(line + "\n" for line in lines))
    logger.info("Wrote manifest %s (%d records)", path, len(lines))
    return path


def _source_file(sample: ImageSample, root: Path | None) -> Path | None:
    if sample.origin is Origin.REAL and root is not None:
        candidate = root / sample.source_id
        if candidate.is_file():
            return candidate
    return None


def read_manifest_records(path: Path | str) -> list[dict[str, Any]]:
    """Parse manifest lines without loading images."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"Manifest not found: {path}")
    records: list[dict[str, Any]] = []
    for line_no, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise ManifestError(f"Invalid JSON in {path}", f"line {line_no}: {e}") from e
        missing = MANIFEST_KEYS - set(record)
        if missing:
            raise ManifestError(
                f"Incomplete record in {path}", f"line {line_no} lacks {sorted(missing)}"
            )
        records.append(record)
    return records


def read_manifest(
    path: Path | str,
    shape: tuple[int, int, int],
    catalog: Sequence[ClassLabel] = DEFAULT_CATALOG,
) -> dict[str, LabeledDataset]:
    """Load a manifest back into datasets keyed by split name.

    Raises:
        ManifestError: On malformed records or records without an image path.
    """
    path = Path(path)
    grouped: dict[str, list[ImageSample]] = {}
    for record in read_manifest_records(path):
        if record["path"] is None:
            raise ManifestError(f"Record {record['source_id']} has no image file")
        try:
            label = ClassLabel(record["label"])
            origin = Origin(record["origin"])
        except ValueError as e:
            raise ManifestError(f"Invalid record in {path}", str(e)) from e
        pixels = load_image(path.parent / record["path"], shape)
        sample = ImageSample(
            pixels=pixels, label=label, source_id=record["source_id"], origin=origin
        )
        grouped.setdefault(str(record["split"]), []).append(sample)
    return {
        name: LabeledDataset(tuple(samples), shape, tuple(catalog))
        for name, samples in grouped.items()
    }


def read_split(
    path: Path | str,
    shape: tuple[int, int, int],
    split_name: str | None = None,
    catalog: Sequence[ClassLabel] = DEFAULT_CATALOG,
) -> LabeledDataset:
    """Load one split, or every record concatenated when ``split_name`` is None."""
    splits = read_manifest(path, shape, catalog)
    if split_name is not None:
        if split_name not in splits:
            raise ManifestError(f"Split '{split_name}' not in {path}", f"found {sorted(splits)}")
        return splits[split_name]
    samples = [s for ds in splits.values() for s in ds]
    return LabeledDataset(tuple(samples), shape, tuple(catalog))
