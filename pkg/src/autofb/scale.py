"""Pixel-to-millimetre scale recovery from the on-screen ruler.

The ruler is a column of tick marks near the left edge of the frame. Ticks
are located with zero-mean normalised cross-correlation (ZNCC) against a
small set of marker templates; the relative size of the matched markers
decides whether consecutive ticks are 5 mm or 10 mm apart.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InconsistentSpacing, RulerNotFound

TEMPLATE_DIR_ENV = "AUTOFB_TEMPLATE_DIR"
DEFAULT_BAND_FRACTION = 0.12
DEFAULT_NCC_THRESHOLD = 0.7
MAX_GAP_CV = 0.1

# Default glyph geometry. The phantom ruler renderer and the shipped PNG
# assets are both produced from these constants.
GLYPH_BACKGROUND = 16
GLYPH_FOREGROUND = 235
GLYPH_SHAPE = (7, 15)  # rows, cols
GLYPH_BAR_ROWS = (2, 5)
GLYPH_BAR_COLS = {"major": (1, 14), "minor": (1, 8)}


@dataclass(frozen=True)
class MarkerTemplate:
    patch: np.ndarray  # uint8, rows x cols
    anchor: tuple[int, int]  # (dx, dy) of marker centre inside the patch
    size_class: str = "major"

    def __post_init__(self):
        h, w = self.patch.shape
        dx, dy = self.anchor
        if not (0 <= dx < w and 0 <= dy < h):
            raise ValueError(f"anchor {self.anchor} outside {w}x{h} patch")
        if self.size_class not in ("major", "minor"):
            raise ValueError(f"unknown size class {self.size_class!r}")

    @property
    def height(self) -> int:
        return self.patch.shape[0]

    @property
    def width(self) -> int:
        return self.patch.shape[1]


@dataclass(frozen=True)
class RulerDetection:
    markers: list  # [(x, y)] sorted by y
    spacing_px: float
    interval_mm: int
    sizes: list  # "major" | "minor" per marker
    scores: list = field(default_factory=list)
    median_gap_px: float = 0.0
    gap_cv: float = 0.0

    def to_dict(self) -> dict:
        return {
            "markers": [[x, y] for x, y in self.markers],
            "sizes": list(self.sizes),
            "scores": list(self.scores),
            "spacing_px": self.spacing_px,
            "median_gap_px": self.median_gap_px,
            "gap_cv": self.gap_cv,
            "interval_mm": self.interval_mm,
        }


@dataclass(frozen=True)
class ScaleEstimate:
    px_per_mm: float
    source: str = "ruler"  # or "fixed-override"
    detection: RulerDetection | None = None

    def __post_init__(self):
        if not (self.px_per_mm > 0 and math.isfinite(self.px_per_mm)):
            raise ValueError(f"px_per_mm must be positive, got {self.px_per_mm}")

    def to_dict(self) -> dict:
        out = {"px_per_mm": self.px_per_mm, "source": self.source}
        if self.detection is not None:
            out["detection"] = self.detection.to_dict()
        return out


def fixed_scale(px_per_mm: float) -> ScaleEstimate:
    return ScaleEstimate(float(px_per_mm), source="fixed-override")


def glyph_patch(size_class: str) -> np.ndarray:
    patch = np.full(GLYPH_SHAPE, GLYPH_BACKGROUND, dtype=np.uint8)
    r0, r1 = GLYPH_BAR_ROWS
    c0, c1 = GLYPH_BAR_COLS[size_class]
    patch[r0:r1, c0:c1] = GLYPH_FOREGROUND
    return patch


def glyph_anchor(size_class: str) -> tuple[int, int]:
    r0, r1 = GLYPH_BAR_ROWS
    c0, c1 = GLYPH_BAR_COLS[size_class]
    return ((c0 + c1 - 1) // 2, (r0 + r1 - 1) // 2)


def default_templates() -> list[MarkerTemplate]:
    return [MarkerTemplate(glyph_patch(k), glyph_anchor(k), k) for k in ("major", "minor")]


def default_template_dir() -> Path:
    env = os.environ.get(TEMPLATE_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("autofb") / "assets" / "templates"))


def load_templates(directory=None) -> list[MarkerTemplate]:
    """Load marker templates from ``directory/templates.json``.

    The sidecar lists one entry per template:
    ``{"file": "major.png", "size_class": "major", "anchor": [dx, dy]}``.
    """
    from PIL import Image

    directory = Path(directory) if directory is not None else default_template_dir()
    meta = json.loads((directory / "templates.json").read_text())
    out = []
    for entry in meta["templates"]:
        with Image.open(directory / entry["file"]) as im:
            patch = np.asarray(im.convert("L"), dtype=np.uint8).copy()
        out.append(MarkerTemplate(patch, tuple(int(v) for v in entry["anchor"]), entry["size_class"]))
    return out


def write_templates(directory, templates=None) -> None:
    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    templates = default_templates() if templates is None else templates
    entries = []
    for t in templates:
        name = f"{t.size_class}.png"
        Image.fromarray(t.patch, mode="L").save(directory / name)
        entries.append({"file": name, "size_class": t.size_class, "anchor": list(t.anchor)})
    (directory / "templates.json").write_text(json.dumps({"templates": entries}, indent=2) + "\n")


def band_columns(width: int, fraction: float = DEFAULT_BAND_FRACTION) -> tuple[int, int]:
    return 0, max(1, int(math.ceil(width * fraction)))


def ncc_map(image, template: MarkerTemplate, band) -> np.ndarray:
    """ZNCC score for every template placement inside ``band``.

    ``out[v, u]`` scores the placement whose top-left corner is at
    (band start + u, v). Placements over a constant window are NaN.
    """
    img = np.asarray(image, dtype=np.float64)
    c0, c1 = band
    sub = img[:, c0:c1]
    th, tw = template.patch.shape
    if sub.shape[0] < th or sub.shape[1] < tw:
        raise ValueError("template larger than search band")
    t = template.patch.astype(np.float64)
    t = t - t.mean()
    tnorm = math.sqrt(float((t * t).sum()))
    if tnorm == 0:
        raise ValueError("template has no contrast")
    win = sliding_window_view(sub, (th, tw))
    num = np.einsum("ijkl,kl->ij", win, t)
    n = th * tw
    s1 = win.sum(axis=(2, 3))
    s2 = np.einsum("ijkl,ijkl->ij", win, win)
    var = s2 - s1 * s1 / n
    # uniform windows: relative tolerance against the window energy
    flat = var <= 1e-9 * np.maximum(s2, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        score = num / (np.sqrt(np.where(flat, 1.0, var)) * tnorm)
    score[flat] = np.nan
    return np.clip(score, -1.0, 1.0)


def _row_profile(score: np.ndarray):
    filled = np.where(np.isnan(score), -np.inf, score)
    best_u = filled.argmax(axis=1)
    prof = filled[np.arange(filled.shape[0]), best_u]
    return prof, best_u


def _peaks(profile: np.ndarray, threshold: float, radius: int) -> list[int]:
    """Greedy non-maximum suppression over a 1D score profile."""
    cand = np.nonzero(profile >= threshold)[0]
    order = cand[np.argsort(-profile[cand], kind="stable")]
    taken: list[int] = []
    for v in order:
        if all(abs(int(v) - k) >= radius for k in taken):
            taken.append(int(v))
    return sorted(taken)


def _refine(profile: np.ndarray, v: int) -> float:
    if v <= 0 or v >= len(profile) - 1:
        return 0.0
    lo, mid, hi = profile[v - 1], profile[v], profile[v + 1]
    if not (np.isfinite(lo) and np.isfinite(hi)):
        return 0.0
    denom = lo - 2.0 * mid + hi
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (lo - hi) / denom, -0.5, 0.5))


def match_template(image, template: MarkerTemplate, search_band=None,
                   threshold: float = DEFAULT_NCC_THRESHOLD) -> list[tuple[float, float, float]]:
    """Locate ``template`` in a vertical band of ``image``.

    Returns ``(x, y, score)`` for each accepted match, where (x, y) is the
    marker anchor in image coordinates with y refined to sub-pixel
    precision. Matches closer than one template height are suppressed in
    favour of the stronger one.
    """
    img = np.asarray(image)
    band = search_band if search_band is not None else (0, img.shape[1])
    score = ncc_map(img, template, band)
    prof, best_u = _row_profile(score)
    out = []
    dx, dy = template.anchor
    for v in _peaks(prof, threshold, template.height):
        y = v + _refine(prof, v) + dy
        x = band[0] + int(best_u[v]) + dx
        out.append((float(x), float(y), float(prof[v])))
    return out


def detect_ruler(image, templates=None, band_fraction: float = DEFAULT_BAND_FRACTION,
                 threshold: float = DEFAULT_NCC_THRESHOLD) -> RulerDetection:
    """Find the ruler ticks in the left band of ``image``.

    Each accepted tick is labelled with the size class of the template that
    scores best there. Spacing is the least-squares slope of tick position
    against tick index, which averages out the integer quantisation of the
    rendered glyphs; the median gap is kept for the consistency check and
    for indexing ticks across any missed marker.
    """
    img = np.asarray(image)
    templates = default_templates() if templates is None else list(templates)
    if not templates:
        raise ValueError("no marker templates")
    band = band_columns(img.shape[1], band_fraction)
    height = max(t.height for t in templates)
    # All templates are compared on a common row grid keyed by anchor row.
    profiles, argx = [], []
    for t in templates:
        if t.height > img.shape[0] or t.width > band[1] - band[0]:
            raise RulerNotFound("search band narrower than marker template")
        prof, best_u = _row_profile(ncc_map(img, t, band))
        full = np.full(img.shape[0], -np.inf)
        ux = np.zeros(img.shape[0], dtype=int)
        dy = t.anchor[1]
        full[dy:dy + len(prof)] = prof
        ux[dy:dy + len(prof)] = best_u + band[0] + t.anchor[0]
        profiles.append(full)
        argx.append(ux)
    stack = np.vstack(profiles)
    combined = stack.max(axis=0)
    rows = _peaks(combined, threshold, height)
    if len(rows) < 3:
        raise RulerNotFound(f"found {len(rows)} ruler markers, need at least 3")

    markers, sizes, scores = [], [], []
    for r in rows:
        k = int(np.argmax(stack[:, r]))
        markers.append((float(argx[k][r]), r + _refine(combined, r)))
        sizes.append(templates[k].size_class)
        scores.append(float(combined[r]))

    ys = np.array([m[1] for m in markers])
    gaps = np.diff(ys)
    med = float(np.median(gaps))
    cv = float(gaps.std() / gaps.mean())
    if cv > MAX_GAP_CV:
        raise InconsistentSpacing(f"ruler gap coefficient of variation {cv:.3f} exceeds {MAX_GAP_CV}")
    steps = np.maximum(np.rint(gaps / med), 1.0)
    idx = np.concatenate([[0.0], np.cumsum(steps)])
    spacing = float(np.polyfit(idx, ys, 1)[0])
    interval = 5 if len(set(sizes)) > 1 else 10
    return RulerDetection(markers, spacing, interval, sizes, scores, med, cv)


def infer_scale(detection: RulerDetection, interval_mm: float | None = None) -> ScaleEstimate:
    interval = detection.interval_mm if interval_mm is None else interval_mm
    return ScaleEstimate(detection.spacing_px / interval, source="ruler", detection=detection)
