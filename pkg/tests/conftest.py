import math
from collections import deque

import numpy as np
import pytest


def ellipse_points(cx, cy, a, b, theta, n, phase=0.0):
    t = phase + np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    x = cx + a * math.cos(theta) * np.cos(t) - b * math.sin(theta) * np.sin(t)
    y = cy + a * math.sin(theta) * np.cos(t) + b * math.cos(theta) * np.sin(t)
    return np.column_stack([x, y])


def raster_ellipse(shape, cx, cy, a, b, theta, label=1):
    h, w = shape
    out = np.zeros(shape, dtype=np.uint8)
    c, s = math.cos(theta), math.sin(theta)
    for r in range(h):
        for col in range(w):
            u = (col - cx) * c + (r - cy) * s
            v = -(col - cx) * s + (r - cy) * c
            if (u / a) ** 2 + (v / b) ** 2 <= 1.0:
                out[r, col] = label
    return out


def flood_components(mask):
    """Brute-force 8-connected components: list of (label, frozenset of (x, y))."""
    h, w = mask.shape
    seen = np.zeros(mask.shape, dtype=bool)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] == 0 or seen[r, c]:
                continue
            lab = mask[r, c]
            pix = set()
            q = deque([(r, c)])
            seen[r, c] = True
            while q:
                y, x = q.popleft()
                pix.add((x, y))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and not seen[yy, xx] and mask[yy, xx] == lab:
                            seen[yy, xx] = True
                            q.append((yy, xx))
            comps.append((int(lab), frozenset(pix)))
    return comps


def angle_diff(t1, t2):
    """Distance between two axis directions modulo pi."""
    d = (t1 - t2) % math.pi
    return min(d, math.pi - d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
