"""Region extraction and shape fitting on label masks.

Masks are 2D ``uint8`` arrays indexed ``[row, col]``. Everything downstream
of a mask works in (x, y) pixel-center coordinates, where pixel ``[r, c]``
has its center at ``(c, r)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateConfiguration, InsufficientPoints


class AnatomyClass(enum.IntEnum):
    BACKGROUND = 0
    HEAD = 1
    ABDOMEN = 2
    FEMUR = 3

    @property
    def short(self) -> str:
        return ("BG", "H", "A", "F")[self.value]


N_CLASSES = len(AnatomyClass)


def validate_mask(mask) -> np.ndarray:
    """Return ``mask`` as a 2D uint8 array, checking the label set."""
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"label mask must be a non-empty 2D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"label mask must hold integers, got {arr.dtype}")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("label values out of uint8 range")
        arr = arr.astype(np.uint8)
    if arr.size and arr.max() >= N_CLASSES:
        raise ValueError(f"label mask contains values outside 0..{N_CLASSES - 1}")
    return arr


@dataclass(frozen=True)
class PixelRegion:
    """One 8-connected component of a single anatomy class."""

    label: AnatomyClass
    pixels: np.ndarray  # (N, 2) int, columns are x, y

    @property
    def area(self) -> int:
        return int(self.pixels.shape[0])

    def as_mask(self, shape=None) -> np.ndarray:
        xs, ys = self.pixels[:, 0], self.pixels[:, 1]
        if shape is None:
            shape = (int(ys.max()) + 1, int(xs.max()) + 1)
        out = np.zeros(shape, dtype=bool)
        out[ys, xs] = True
        return out


@dataclass(frozen=True)
class EllipseParams:
    cx: float
    cy: float
    a: float  # semi-major
    b: float  # semi-minor
    theta: float  # major-axis direction in [0, pi), y axis pointing down

    def point_at(self, t):
        """Parametric point(s) on the ellipse."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        ct, st = np.cos(t), np.sin(t)
        return (self.cx + self.a * c * ct - self.b * s * st,
                self.cy + self.a * s * ct + self.b * c * st)


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    orientation = 0.0  # axis-aligned by construction

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y


_EIGHT = np.ones((3, 3), dtype=bool)


def extract_regions(mask) -> list[PixelRegion]:
    """Split every non-background class into 8-connected components.

    Regions come back sorted by area, largest first. Ties are broken by
    class then by raster order of the component's first pixel so the
    output is fully deterministic.
    """
    mask = validate_mask(mask)
    regions = []
    for cls in AnatomyClass:
        if cls is AnatomyClass.BACKGROUND:
            continue
        labelled, n = ndimage.label(mask == cls, structure=_EIGHT)
        if n == 0:
            continue
        rows, cols = np.nonzero(labelled)  # raster order
        ids = labelled[rows, cols]
        order = np.argsort(ids, kind="stable")
        rows, cols, ids = rows[order], cols[order], ids[order]
        bounds = np.searchsorted(ids, np.arange(1, n + 2))
        for k in range(n):
            lo, hi = bounds[k], bounds[k + 1]
            pix = np.column_stack([cols[lo:hi], rows[lo:hi]]).astype(np.int64)
            regions.append(PixelRegion(cls, pix))
    regions.sort(key=lambda r: (-r.area, int(r.label), int(r.pixels[0, 1]), int(r.pixels[0, 0])))
    return regions


# Clockwise in image coordinates (y down), starting west.
_DIRS = ((-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1))
_DIR_INDEX = {d: i for i, d in enumerate(_DIRS)}


def trace_contour(region: PixelRegion) -> np.ndarray:
    """Moore-neighbour boundary following.

    Returns an ``(N, 2)`` array of (x, y) pixel centres walking the outer
    boundary clockwise (on screen), starting from the top-most, left-most
    pixel. The sequence is closed implicitly: the last point is an
    8-neighbour of the first. Thin parts of a region are walked on both
    sides, so a pixel may occur more than once.
    """
    pix = region.pixels
    if pix.shape[0] == 0:
        raise ValueError("empty region")
    x0, y0 = int(pix[:, 0].min()), int(pix[:, 1].min())
    # pad by one so neighbour lookups never leave the array
    w = int(pix[:, 0].max()) - x0 + 3
    h = int(pix[:, 1].max()) - y0 + 3
    inside = np.zeros((h, w), dtype=bool)
    inside[pix[:, 1] - y0 + 1, pix[:, 0] - x0 + 1] = True

    rows, cols = np.nonzero(inside)
    start = (int(cols[0]), int(rows[0]))  # raster-first pixel; its west is outside
    start_back = 0

    out = [start]
    p, back = start, start_back
    second = None
    while True:
        for step in range(1, 9):
            k = (back + step) % 8
            dx, dy = _DIRS[k]
            q = (p[0] + dx, p[1] + dy)
            if inside[q[1], q[0]]:
                break
        else:
            break  # isolated pixel
        if second is None:
            second = q
        elif p == start and q == second:
            # the first move repeats, so the walk is periodic from here
            out.pop()
            break
        prev = _DIRS[(k - 1) % 8]
        prev_abs = (p[0] + prev[0], p[1] + prev[1])
        back = _DIR_INDEX[(prev_abs[0] - q[0], prev_abs[1] - q[1])]
        p = q
        out.append(p)

    arr = np.asarray(out, dtype=np.int64)
    arr[:, 0] += x0 - 1
    arr[:, 1] += y0 - 1
    return arr


def _normalize(pts: np.ndarray):
    center = pts.mean(axis=0)
    centred = pts - center
    scale = float(np.mean(np.hypot(centred[:, 0], centred[:, 1])))
    return centred / scale, center, scale


def fit_conic(points) -> np.ndarray:
    """Direct least-squares ellipse-specific conic fit on ``points``.

    Minimises the algebraic distance subject to ``4ac - b^2 = 1`` using the
    partitioned (quadratic / linear block) formulation, which reduces the
    6x6 generalised eigenproblem to a 3x3 ordinary one. Returns conic
    coefficients ``(A, B, C, D, E, F)`` of ``Ax^2 + Bxy + Cy^2 + Dx + Ey + F``
    in the coordinates of ``points`` as given.
    """
    pts = np.asarray(points, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1 = d1.T @ d1
    s2 = d1.T @ d2
    s3 = d2.T @ d2
    if np.linalg.cond(s3) > 1e12:
        raise DegenerateConfiguration("point scatter is rank deficient")
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    # premultiply by inverse of the 3x3 constraint block [[0,0,2],[0,-1,0],[2,0,0]]
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    evals, evecs = np.linalg.eig(m)
    evecs = np.real(evecs)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.nonzero(cond > 0)[0]
    if ok.size == 0:
        raise DegenerateConfiguration("no ellipse-specific solution")
    if ok.size > 1:
        # numerically, pick the admissible eigenvector with the smallest |eigenvalue|
        ok = ok[np.argsort(np.abs(np.real(evals[ok])))]
    a1 = evecs[:, ok[0]]
    coeffs = np.concatenate([a1, t @ a1])
    return coeffs / np.linalg.norm(coeffs)


def conic_to_params(coeffs) -> EllipseParams:
    A, B, C, D, E, F = (float(v) for v in coeffs)
    det = 4.0 * A * C - B * B
    if det <= 0:
        raise DegenerateConfiguration("conic is not an ellipse")
    cx = (B * E - 2.0 * C * D) / det
    cy = (B * D - 2.0 * A * E) / det
    f0 = F + 0.5 * (D * cx + E * cy)
    q = np.array([[A, B / 2.0], [B / 2.0, C]])
    if f0 > 0:
        q, f0 = -q, -f0
    if f0 >= 0:
        raise DegenerateConfiguration("conic degenerates to a point")
    lam, vec = np.linalg.eigh(q)  # ascending: lam[0] belongs to the major axis
    if lam[0] <= 0:
        raise DegenerateConfiguration("conic is not an ellipse")
    a = math.sqrt(-f0 / lam[0])
    b = math.sqrt(-f0 / lam[1])
    theta = math.atan2(vec[1, 0], vec[0, 0]) % math.pi
    if theta >= math.pi:
        theta = 0.0
    return EllipseParams(cx, cy, a, b, theta)


def fit_ellipse(points) -> EllipseParams:
    """Fit an ellipse to ``points`` (sequence of (x, y), at least six).

    Points are centred on their mean and scaled to unit mean radius before
    the solve, so results do not depend on where in the image they lie.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (N, 2) array")
    if pts.shape[0] < 6:
        raise InsufficientPoints(f"need at least 6 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    norm, center, scale = _normalize(pts)
    if scale == 0:
        raise DegenerateConfiguration("all points coincide")
    sv = np.linalg.svd(norm, compute_uv=False)
    if sv[1] <= 1e-9 * sv[0]:
        raise DegenerateConfiguration("points are collinear")
    e = conic_to_params(fit_conic(norm))
    return EllipseParams(
        cx=float(center[0] + scale * e.cx),
        cy=float(center[1] + scale * e.cy),
        a=float(scale * e.a),
        b=float(scale * e.b),
        theta=float(e.theta),
    )


def fit_bbox(region: PixelRegion) -> BoundingBox:
    pix = region.pixels
    mn = pix.min(axis=0)
    mx = pix.max(axis=0)
    return BoundingBox(float(mn[0]), float(mn[1]), float(mx[0]), float(mx[1]))


def bbox_diagonal(box: BoundingBox) -> float:
    return math.hypot(box.max_x - box.min_x, box.max_y - box.min_y)
