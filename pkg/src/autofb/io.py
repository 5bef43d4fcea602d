"""File formats: label-mask PNGs, grey frames, CSV inputs and report JSON."""
from __future__ import annotations

import csv
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import __version__
from .errors import IllegalLabelValue, UnreadableFile
from .geometry import N_CLASSES

SIGNIFICANT_DIGITS = 6
IMAGE_SUFFIXES = (".png",)


def _read_gray(path) -> np.ndarray:
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "P", "I", "I;16", "1"):
                raise UnreadableFile(f"{path}: expected a single-channel PNG, got mode {im.mode}")
            if im.mode == "P":
                raise UnreadableFile(f"{path}: palettised PNGs are not label masks; save plain grayscale")
            arr = np.asarray(im)
    except (OSError, UnidentifiedImageError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    return arr


def load_mask(path) -> np.ndarray:
    """Decode a label-mask PNG whose pixel values are exactly 0..3."""
    arr = _read_gray(path)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    bad = (arr < 0) | (arr >= N_CLASSES)
    if bad.any():
        r, c = (int(v) for v in np.argwhere(bad)[0])
        raise IllegalLabelValue(int(arr[r, c]), c, r)
    return arr.astype(np.uint8)


def save_mask(path, mask) -> None:
    mask = np.asarray(mask, dtype=np.uint8)
    Image.fromarray(mask, mode="L").save(Path(path))


def load_gray(path) -> np.ndarray:
    arr = _read_gray(path)
    if arr.dtype != np.uint8:
        if arr.max() > 255:
            raise UnreadableFile(f"{path}: expected 8-bit intensities")
        arr = arr.astype(np.uint8)
    return arr


def save_gray(path, image) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(Path(path))


def list_images(directory) -> dict[str, Path]:
    """Map image id (file stem) to path for every PNG in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        return {}
    return {p.stem: p for p in sorted(directory.iterdir())
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES}


def round_sig(value, digits: int = SIGNIFICANT_DIGITS):
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if not math.isfinite(v) or v == 0.0:
        return v
    return float(f"{v:.{digits - 1}e}")


def rounded(obj, digits: int = SIGNIFICANT_DIGITS):
    """Recursively round floats to ``digits`` significant digits."""
    if isinstance(obj, dict):
        return {str(k): rounded(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist(), digits)
    if isinstance(obj, (float, np.floating, int, np.integer)) and not isinstance(obj, bool):
        return round_sig(obj, digits)
    return obj


def dumps(doc) -> str:
    return json.dumps(rounded(doc), sort_keys=True, indent=2) + "\n"


def write_json(path, doc) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc


def report_schema() -> dict:
    return json.loads((resources.files("autofb") / "schemas" / "report.schema.json").read_text())


def validate_report(doc) -> None:
    import jsonschema

    jsonschema.validate(doc, report_schema())


def report_document(entries: dict, segmentation=None, errors=None) -> dict:
    """Assemble a report document from per-image entry dicts keyed by id."""
    ok = sum(1 for e in entries.values() if e["status"] == "ok")
    doc = {
        "tool": "autofb",
        "version": __version__,
        "entries": {k: entries[k] for k in sorted(entries)},
        "summary": {"n_images": len(entries), "n_ok": ok, "n_failed": len(entries) - ok},
    }
    if segmentation is not None:
        doc["segmentation"] = segmentation
    if errors is not None:
        doc["error_stats"] = errors
    return doc


def read_manifest(path) -> list[tuple[str, int]]:
    """``subject_id,image_count`` rows."""
    with open(path, newline="") as fh:
        return [(row["subject_id"], int(row["image_count"])) for row in csv.DictReader(fh)]


def read_counts(path) -> dict[str, float]:
    """``class,count`` rows; class is a name (BG/H/A/F or full) or label int."""
    with open(path, newline="") as fh:
        return {row["class"]: float(row["count"]) for row in csv.DictReader(fh)}


def read_clinical(path) -> list[tuple[str, str, float]]:
    """``image_id,measurement,value_mm`` rows."""
    with open(path, newline="") as fh:
        return [(row["image_id"], row["measurement"], float(row["value_mm"]))
                for row in csv.DictReader(fh)]


def write_csv(path_or_fh, header, rows) -> None:
    if hasattr(path_or_fh, "write"):
        w = csv.writer(path_or_fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_fh, "w", newline="") as fh:
        write_csv(fh, header, rows)
