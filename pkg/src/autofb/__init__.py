"""Fetal biometry from multi-class ultrasound label masks."""

__version__ = "0.1.0"

from .biometry import (  # noqa: E402
    BiometryReport,
    PlaneClass,
    assign_abdomen_axes,
    assign_head_axes,
    circumference_from_diameters,
    detect_plane,
    measure,
)
from .geometry import (  # noqa: E402
    AnatomyClass,
    BoundingBox,
    EllipseParams,
    PixelRegion,
    bbox_diagonal,
    extract_regions,
    fit_bbox,
    fit_ellipse,
    trace_contour,
)
from .scale import ScaleEstimate, detect_ruler, fixed_scale, infer_scale, match_template  # noqa: E402

__all__ = [
    "AnatomyClass",
    "BiometryReport",
    "BoundingBox",
    "EllipseParams",
    "PixelRegion",
    "PlaneClass",
    "ScaleEstimate",
    "assign_abdomen_axes",
    "assign_head_axes",
    "bbox_diagonal",
    "circumference_from_diameters",
    "detect_plane",
    "detect_ruler",
    "extract_regions",
    "fit_bbox",
    "fit_ellipse",
    "fixed_scale",
    "infer_scale",
    "match_template",
    "measure",
    "trace_contour",
]
