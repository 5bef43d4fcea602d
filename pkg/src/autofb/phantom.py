"""Synthetic label masks and ruler frames with closed-form ground truth."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .biometry import (
    MEASUREMENTS,
    PlaneClass,
    assign_abdomen_axes,
    assign_head_axes,
    circumference_from_diameters,
)
from .errors import SpecOutOfBounds, UnresolvableTicks
from .geometry import BoundingBox, EllipseParams, bbox_diagonal, extract_regions
from .scale import (
    DEFAULT_BAND_FRACTION,
    GLYPH_BACKGROUND,
    GLYPH_BAR_COLS,
    band_columns,
    glyph_anchor,
    glyph_patch,
)

MARGIN = 5
MIN_TICK_SPACING = 8
RULER_X = 3  # column of the left end of every tick bar
RULER_Y0 = 10.0  # row of the first tick
ANATOMY_INTENSITY = 96


@dataclass(frozen=True)
class PhantomSpec:
    kind: PlaneClass
    width: int
    height: int
    px_per_mm: float
    ellipse: tuple | None = None  # (cx, cy, a, b, theta)
    capsule: tuple | None = None  # ((x0, y0), (x1, y1), r)
    interval_mm: int = 5
    noise_radius: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", PlaneClass(self.kind))
        if self.px_per_mm <= 0:
            raise ValueError("px_per_mm must be positive")
        if self.interval_mm not in (5, 10):
            raise ValueError("interval_mm must be 5 or 10")
        wants_capsule = self.kind is PlaneClass.FEMUR
        if wants_capsule and (self.capsule is None or self.ellipse is not None):
            raise ValueError("femur phantoms take a capsule and no ellipse")
        if not wants_capsule and (self.ellipse is None or self.capsule is not None):
            raise ValueError("head/abdomen phantoms take an ellipse and no capsule")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        d = dict(d)
        if d.get("ellipse") is not None:
            d["ellipse"] = tuple(d["ellipse"])
        if d.get("capsule") is not None:
            p0, p1, r = d["capsule"]
            d["capsule"] = (tuple(p0), tuple(p1), r)
        return cls(**d)


@dataclass
class PhantomTruth:
    spec: PhantomSpec
    plane: PlaneClass
    measurements_px: dict
    measurements_mm: dict
    ticks: list = field(default_factory=list)  # [(x, y, size_class)] of rendered ruler markers
    bbox: tuple | None = None  # femur only: rasterised (min_x, min_y, max_x, max_y)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "plane": self.plane.value,
            "px_per_mm": self.spec.px_per_mm,
            "interval_mm": self.spec.interval_mm,
            "measurements_px": dict(self.measurements_px),
            "measurements_mm": dict(self.measurements_mm),
            "ticks": [list(t) for t in self.ticks],
            "bbox": list(self.bbox) if self.bbox is not None else None,
        }


def _ellipse_extent(a, b, theta):
    c, s = math.cos(theta), math.sin(theta)
    return math.sqrt((a * c) ** 2 + (b * s) ** 2), math.sqrt((a * s) ** 2 + (b * c) ** 2)


def _check_inside(spec: PhantomSpec, lo_x, lo_y, hi_x, hi_y):
    if lo_x < MARGIN or lo_y < MARGIN or hi_x > spec.width - 1 - MARGIN or hi_y > spec.height - 1 - MARGIN:
        raise SpecOutOfBounds(
            f"shape extent ({lo_x:.1f}, {lo_y:.1f})-({hi_x:.1f}, {hi_y:.1f}) leaves less than "
            f"{MARGIN} px margin in a {spec.width}x{spec.height} image")


def _rasterize_ellipse(spec: PhantomSpec) -> np.ndarray:
    cx, cy, a, b, theta = spec.ellipse
    if not (a >= b > 0):
        raise ValueError("ellipse needs a >= b > 0")
    hx, hy = _ellipse_extent(a, b, theta)
    _check_inside(spec, cx - hx, cy - hy, cx + hx, cy + hy)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    c, s = math.cos(theta), math.sin(theta)
    u = (xx - cx) * c + (yy - cy) * s
    v = -(xx - cx) * s + (yy - cy) * c
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _rasterize_capsule(spec: PhantomSpec) -> np.ndarray:
    (x0, y0), (x1, y1), r = spec.capsule
    if r <= 0:
        raise ValueError("capsule radius must be positive")
    _check_inside(spec, min(x0, x1) - r, min(y0, y1) - r, max(x0, x1) + r, max(y0, y1) + r)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(float)
    dx, dy = x1 - x0, y1 - y0
    seg2 = dx * dx + dy * dy
    if seg2 == 0:
        t = np.zeros_like(xx)
    else:
        t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / seg2, 0.0, 1.0)
    return (xx - (x0 + t * dx)) ** 2 + (yy - (y0 + t * dy)) ** 2 <= r * r


def tick_positions(spec: PhantomSpec) -> list[tuple[float, float, str]]:
    """Anchor positions of the rendered ruler markers, top to bottom."""
    spacing = spec.px_per_mm * spec.interval_mm
    if spacing < MIN_TICK_SPACING:
        raise UnresolvableTicks(
            f"tick spacing {spacing:.2f} px is below the {MIN_TICK_SPACING} px resolvable minimum")
    half = glyph_patch("major").shape[0] // 2
    out = []
    k = 0
    while True:
        y = RULER_Y0 + k * spacing
        if round(y) + half > spec.height - 1:
            break
        size = "minor" if (spec.interval_mm == 5 and k % 2 == 1) else "major"
        dx, _ = glyph_anchor(size)
        x = RULER_X - GLYPH_BAR_COLS[size][0] + dx
        out.append((float(x), float(round(y)), size))
        k += 1
    if len(out) < 3:
        raise UnresolvableTicks(f"only {len(out)} ticks fit in a {spec.height} px tall frame")
    return out


def render_ruler(spec: PhantomSpec) -> np.ndarray:
    """Grey frame with a vertical tick ruler in the left band.

    Ticks are the default marker glyphs pasted verbatim at integer rows
    (nearest to the ideal position), so template matching sees the exact
    glyph; alternating major/minor for a 5 mm interval, majors only for 10.
    """
    ticks = tick_positions(spec)
    patch_w = glyph_patch("major").shape[1]
    left = RULER_X - GLYPH_BAR_COLS["major"][0]
    _, band_end = band_columns(spec.width, DEFAULT_BAND_FRACTION)
    if left + patch_w > band_end:
        raise SpecOutOfBounds(f"a {spec.width} px wide frame leaves no room for the ruler band")
    img = np.full((spec.height, spec.width), GLYPH_BACKGROUND, dtype=np.uint8)
    for _, y, size in ticks:
        patch = glyph_patch(size)
        _, ay = glyph_anchor(size)
        top = int(y) - ay
        img[top:top + patch.shape[0], left:left + patch.shape[1]] = patch
    return img


def render_frame(spec: PhantomSpec, mask: np.ndarray) -> np.ndarray:
    """Ruler frame with the anatomy painted as a flat grey blob outside the ruler band."""
    img = render_ruler(spec)
    _, band_end = band_columns(spec.width, DEFAULT_BAND_FRACTION)
    body = np.asarray(mask) > 0
    body[:, :band_end] = False
    img[body] = ANATOMY_INTENSITY
    return img


def render_mask(spec: PhantomSpec) -> tuple[np.ndarray, PhantomTruth]:
    """Rasterise the phantom by pixel-centre sampling and compute its truth."""
    s = spec.px_per_mm
    if spec.kind is PlaneClass.FEMUR:
        inside = _rasterize_capsule(spec)
    else:
        inside = _rasterize_ellipse(spec)
    label = spec.kind.anatomy
    mask = np.where(inside, np.uint8(label), np.uint8(0)).astype(np.uint8)

    bbox = None
    if spec.kind is PlaneClass.FEMUR:
        rows, cols = np.nonzero(inside)
        bbox = (float(cols.min()), float(rows.min()), float(cols.max()), float(rows.max()))
        px = {"FL": bbox_diagonal(BoundingBox(*bbox))}
    else:
        e = EllipseParams(*spec.ellipse)
        if spec.kind is PlaneClass.HEAD:
            px = assign_head_axes(e)
            px["HC"] = circumference_from_diameters(px["BPD"], px["OFD"])
        else:
            px = assign_abdomen_axes(e)
            px["AC"] = circumference_from_diameters(px["TAD"], px["APAD"])
        px = {k: px[k] for k in MEASUREMENTS[spec.kind.value]}
    mm = {k: v / s for k, v in px.items()}

    if spec.noise_radius > 0:
        mask = perturb_mask(mask, spec.noise_radius, spec.seed)
    try:
        ticks = tick_positions(spec)
    except UnresolvableTicks:
        ticks = []
    return mask, PhantomTruth(spec, spec.kind, px, mm, ticks, bbox)


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def _morph_region(out: np.ndarray, region, amount: int) -> None:
    if amount == 0:
        return
    r = abs(amount)
    xs, ys = region.pixels[:, 0], region.pixels[:, 1]
    y0, y1 = max(int(ys.min()) - r - 1, 0), min(int(ys.max()) + r + 2, out.shape[0])
    x0, x1 = max(int(xs.min()) - r - 1, 0), min(int(xs.max()) + r + 2, out.shape[1])
    local = np.zeros((y1 - y0, x1 - x0), dtype=bool)
    local[ys - y0, xs - x0] = True
    view = out[y0:y1, x0:x1]
    if amount > 0:
        grown = ndimage.binary_dilation(local, structure=_disk(r))
        view[grown & (view == 0)] = int(region.label)
    else:
        # pixels outside the array count as background
        shrunk = ndimage.binary_erosion(local, structure=_disk(r), border_value=0)
        view[local & ~shrunk] = 0


def morph_mask(mask, amount: int) -> np.ndarray:
    """Dilate (amount > 0) or erode (amount < 0) every anatomy region by a disc."""
    mask = np.asarray(mask, dtype=np.uint8)
    out = mask.copy()
    for region in extract_regions(mask):
        _morph_region(out, region, int(amount))
    return out


def perturb_mask(mask, radius: int, seed: int) -> np.ndarray:
    """Erode or dilate each anatomy region by a random amount up to ``radius`` px.

    The signed amount per region is drawn uniformly from the integers in
    ``[-radius, radius]``; regions are visited in ``extract_regions`` order so
    a fixed seed always yields the same mask. Dilation only claims
    background pixels.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    mask = np.asarray(mask, dtype=np.uint8)
    if radius == 0:
        return mask.copy()
    rng = np.random.default_rng(seed)
    out = mask.copy()
    for region in extract_regions(mask):
        _morph_region(out, region, int(rng.integers(-radius, radius + 1)))
    return out


def random_spec(kind, rng: np.random.Generator, width: int = 640, height: int = 512,
                a_range=(100.0, 180.0), px_per_mm_range=(2.0, 12.0), interval_mm=None,
                noise_radius: int = 0) -> PhantomSpec:
    """Draw a phantom that fits the frame with room for the ruler band."""
    kind = PlaneClass(kind)
    _, band_end = band_columns(width, DEFAULT_BAND_FRACTION)
    px_per_mm = float(rng.uniform(*px_per_mm_range))
    interval = int(rng.choice([5, 10])) if interval_mm is None else int(interval_mm)
    seed = int(rng.integers(0, 2**31 - 1))
    lo_x = band_end + 10
    if kind is PlaneClass.FEMUR:
        length = float(rng.uniform(60.0, 220.0))
        angle = float(rng.uniform(0.0, math.pi))
        r = float(rng.uniform(3.0, 8.0))
        hx = abs(math.cos(angle)) * length / 2 + r
        hy = abs(math.sin(angle)) * length / 2 + r
        cx = float(rng.uniform(lo_x + hx, width - 1 - MARGIN - 5 - hx))
        cy = float(rng.uniform(MARGIN + 5 + hy, height - 1 - MARGIN - 5 - hy))
        ux, uy = math.cos(angle) * length / 2, math.sin(angle) * length / 2
        capsule = ((cx - ux, cy - uy), (cx + ux, cy + uy), r)
        return PhantomSpec(kind, width, height, px_per_mm, capsule=capsule,
                           interval_mm=interval, noise_radius=noise_radius, seed=seed)
    a = float(rng.uniform(*a_range))
    ratio = (0.65, 0.95) if kind is PlaneClass.HEAD else (0.6, 1.0)
    b = a * float(rng.uniform(*ratio))
    theta = float(rng.uniform(0.0, math.pi))
    hx, hy = _ellipse_extent(a, b, theta)
    if lo_x + 2 * hx > width - 1 - MARGIN - 5 or 2 * hy > height - 2 * (MARGIN + 5):
        raise SpecOutOfBounds(f"a={a:.1f} does not fit a {width}x{height} frame")
    cx = float(rng.uniform(lo_x + hx, width - 1 - MARGIN - 5 - hx))
    cy = float(rng.uniform(MARGIN + 5 + hy, height - 1 - MARGIN - 5 - hy))
    return PhantomSpec(kind, width, height, px_per_mm, ellipse=(cx, cy, a, b, theta),
                       interval_mm=interval, noise_radius=noise_radius, seed=seed)
