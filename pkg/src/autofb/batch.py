"""Batch measurement over a directory of label masks."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .biometry import DEFAULT_BOUNDARY_OFFSET, DEFAULT_MIN_AREA, measure
from .errors import AutoFBError, NoInputs, UnreadableFile
from .io import list_images, load_gray, load_mask, report_document
from .scale import (
    DEFAULT_BAND_FRACTION,
    DEFAULT_NCC_THRESHOLD,
    detect_ruler,
    fixed_scale,
    infer_scale,
    load_templates,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    masks_dir: Path
    images_dir: Path | None = None
    px_per_mm: float | None = None  # set => fixed scale, otherwise ruler
    ncc_threshold: float = DEFAULT_NCC_THRESHOLD
    band_fraction: float = DEFAULT_BAND_FRACTION
    interval_mm: float | None = None
    template_dir: Path | None = None
    min_area: int = DEFAULT_MIN_AREA
    boundary_offset: float = DEFAULT_BOUNDARY_OFFSET
    workers: int = 1

    @property
    def scale_mode(self) -> str:
        return "ruler" if self.px_per_mm is None else "fixed"

    def validate(self) -> None:
        if not Path(self.masks_dir).is_dir():
            raise NoInputs(f"mask directory {self.masks_dir} does not exist")
        if self.px_per_mm is not None and not self.px_per_mm > 0:
            raise ValueError("--px-per-mm must be positive")
        if self.scale_mode == "ruler" and (self.images_dir is None or not Path(self.images_dir).is_dir()):
            raise ValueError("ruler scale needs an existing --images directory")


def _error_entry(exc: Exception) -> dict:
    code = getattr(exc, "code", type(exc).__name__)
    return {"status": "error", "error": {"code": code, "message": str(exc)}}


def measure_one(image_id: str, config: RunConfig, templates=None) -> dict:
    """Report entry for one image id; failures become error entries."""
    try:
        mask = load_mask(Path(config.masks_dir) / f"{image_id}.png")
        if config.scale_mode == "fixed":
            scale = fixed_scale(config.px_per_mm)
        else:
            frame_path = Path(config.images_dir) / f"{image_id}.png"
            if not frame_path.is_file():
                raise UnreadableFile(f"no frame {frame_path.name} for ruler scale")
            if templates is None:
                templates = load_templates(config.template_dir)
            det = detect_ruler(load_gray(frame_path), templates, config.band_fraction, config.ncc_threshold)
            scale = infer_scale(det, config.interval_mm)
        report = measure(mask, scale, min_area=config.min_area, boundary_offset=config.boundary_offset)
    except (AutoFBError, ValueError) as exc:
        log.info("%s: %s", image_id, exc)
        return _error_entry(exc)
    entry = {"status": "ok"}
    entry.update(report.to_dict())
    return entry


def _worker(args):
    image_id, config = args
    return image_id, measure_one(image_id, config)


def run_measure_batch(config: RunConfig) -> dict:
    """Measure every mask in ``config.masks_dir``; returns a report document."""
    config.validate()
    ids = sorted(list_images(config.masks_dir))
    if not ids:
        raise NoInputs(f"no PNG masks in {config.masks_dir}")
    entries = {}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for image_id, entry in pool.map(_worker, [(i, config) for i in ids]):
                entries[image_id] = entry
    else:
        templates = None
        if config.scale_mode == "ruler":
            try:
                templates = load_templates(config.template_dir)
            except (OSError, KeyError, ValueError) as exc:
                raise UnreadableFile(f"cannot load marker templates: {exc}") from exc
        for image_id in ids:
            entries[image_id] = measure_one(image_id, config, templates)
    return report_document(entries)
