"""Per-image biometry: plane identification, shape fitting, unit conversion."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoAnatomy
from .geometry import (
    AnatomyClass,
    BoundingBox,
    EllipseParams,
    PixelRegion,
    bbox_diagonal,
    extract_regions,
    fit_bbox,
    fit_ellipse,
    trace_contour,
    validate_mask,
)
from .scale import ScaleEstimate

DEFAULT_MIN_AREA = 50
DEFAULT_BOUNDARY_OFFSET = 0.5
ECCENTRIC_RATIO = 0.25

MEASUREMENTS = {
    "head": ("BPD", "OFD", "HC"),
    "abdomen": ("TAD", "APAD", "AC"),
    "femur": ("FL",),
}


class PlaneClass(str, enum.Enum):
    HEAD = "head"  # transventricular
    ABDOMEN = "abdomen"  # transabdominal
    FEMUR = "femur"

    @property
    def anatomy(self) -> AnatomyClass:
        return _PLANE_TO_CLASS[self]

    @classmethod
    def from_anatomy(cls, label) -> "PlaneClass":
        return _CLASS_TO_PLANE[AnatomyClass(label)]


_PLANE_TO_CLASS = {
    PlaneClass.HEAD: AnatomyClass.HEAD,
    PlaneClass.ABDOMEN: AnatomyClass.ABDOMEN,
    PlaneClass.FEMUR: AnatomyClass.FEMUR,
}
_CLASS_TO_PLANE = {v: k for k, v in _PLANE_TO_CLASS.items()}


@dataclass(frozen=True)
class Measurement:
    value_px: float
    value_mm: float


@dataclass
class BiometryReport:
    plane: PlaneClass
    scale: ScaleEstimate
    fitted: EllipseParams | BoundingBox
    measurements: dict[str, Measurement]
    flags: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def mm(self, name: str) -> float:
        return self.measurements[name].value_mm

    def px(self, name: str) -> float:
        return self.measurements[name].value_px

    def to_dict(self) -> dict:
        if isinstance(self.fitted, EllipseParams):
            fit = {"type": "ellipse", "cx": self.fitted.cx, "cy": self.fitted.cy,
                   "a": self.fitted.a, "b": self.fitted.b, "theta": self.fitted.theta}
        else:
            fit = {"type": "bbox", "min_x": self.fitted.min_x, "min_y": self.fitted.min_y,
                   "max_x": self.fitted.max_x, "max_y": self.fitted.max_y, "orientation": 0.0}
        return {
            "plane": self.plane.value,
            "scale": self.scale.to_dict(),
            "fit": fit,
            "measurements": {k: {"value_px": m.value_px, "value_mm": m.value_mm}
                             for k, m in self.measurements.items()},
            "flags": list(self.flags),
            "provenance": dict(self.provenance),
        }


def detect_plane(mask) -> tuple[PlaneClass, PixelRegion]:
    """Pick the plane from the anatomy class covering the most pixels.

    Totals are summed per class before choosing, so a structure split by a
    thin segmentation gap still counts in full. The region returned is the
    largest connected component of the winning class. Ties between classes
    go to the lower label.
    """
    mask = validate_mask(mask)
    counts = np.bincount(mask.ravel(), minlength=len(AnatomyClass))
    counts[AnatomyClass.BACKGROUND] = 0
    if counts.max() == 0:
        raise NoAnatomy("mask contains only background")
    label = AnatomyClass(int(np.argmax(counts)))
    region = next(r for r in extract_regions(mask) if r.label == label)
    return PlaneClass.from_anatomy(label), region


def circumference_from_diameters(d1: float, d2: float) -> float:
    if d1 < 0 or d2 < 0:
        raise ValueError("diameters must be non-negative")
    return math.pi * (d1 + d2) / 2.0


def assign_head_axes(e: EllipseParams) -> dict[str, float]:
    # occipito-frontal is the long head axis
    return {"BPD": 2.0 * e.b, "OFD": 2.0 * e.a}


def assign_abdomen_axes(e: EllipseParams) -> dict[str, float]:
    """TAD is the full axis lying within 45 degrees of image-horizontal."""
    theta = e.theta % math.pi
    from_horizontal = min(theta, math.pi - theta)
    if from_horizontal <= math.pi / 4 + 1e-12:
        return {"TAD": 2.0 * e.a, "APAD": 2.0 * e.b}
    return {"TAD": 2.0 * e.b, "APAD": 2.0 * e.a}


def _to_mm(values_px: dict[str, float], scale: ScaleEstimate) -> dict[str, Measurement]:
    return {k: Measurement(float(v), float(v) / scale.px_per_mm) for k, v in values_px.items()}


def measure(mask, scale: ScaleEstimate, min_area: int = DEFAULT_MIN_AREA,
            boundary_offset: float = DEFAULT_BOUNDARY_OFFSET) -> BiometryReport:
    """Measure one segmented standard plane.

    Head and abdomen regions are traced and fitted with an ellipse; the femur
    gets an axis-aligned box whose diagonal is the femur length.

    ``boundary_offset`` widens each fitted semi-axis: traced contour points
    are pixel centres, which sit on average half a pixel inside the
    region's footprint. Set it to 0 to report the raw contour fit.
    """
    plane, region = detect_plane(mask)
    flags = []
    if region.area < min_area:
        flags.append("TinyRegion")
    provenance = {"component_area": region.area}

    if plane is PlaneClass.FEMUR:
        box = fit_bbox(region)
        fl = bbox_diagonal(box)
        if fl == 0:
            flags.append("DegenerateFemur")
        provenance["method"] = "axis-aligned-bbox"
        return BiometryReport(plane, scale, box, _to_mm({"FL": fl}, scale), flags, provenance)

    contour = trace_contour(region)
    raw = fit_ellipse(contour)
    e = EllipseParams(float(raw.cx), float(raw.cy), raw.a + boundary_offset,
                      raw.b + boundary_offset, float(raw.theta))
    if e.b / e.a < ECCENTRIC_RATIO:
        flags.append("EccentricFit")
    provenance.update(method="direct-least-squares-ellipse", contour_points=int(len(contour)),
                      boundary_offset_px=boundary_offset)
    if plane is PlaneClass.HEAD:
        axes = assign_head_axes(e)
        axes["HC"] = circumference_from_diameters(axes["BPD"], axes["OFD"])
        names = MEASUREMENTS["head"]
    else:
        axes = assign_abdomen_axes(e)
        axes["AC"] = circumference_from_diameters(axes["TAD"], axes["APAD"])
        names = MEASUREMENTS["abdomen"]
    values = {k: axes[k] for k in names}
    return BiometryReport(plane, scale, e, _to_mm(values, scale), flags, provenance)
