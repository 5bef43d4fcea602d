import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autofb.biometry import PlaneClass
from autofb.errors import SpecOutOfBounds, UnresolvableTicks
from autofb.phantom import (
    PhantomSpec,
    morph_mask,
    perturb_mask,
    random_spec,
    render_frame,
    render_mask,
    tick_positions,
)


def disc_spec(r=50.0, **kw):
    return PhantomSpec("head", 200, 200, 4.0, ellipse=(100.0, 100.0, r, r, 0.0), **kw)


def test_disc_area():
    mask, truth = render_mask(disc_spec())
    assert int((mask == 1).sum()) == pytest.approx(math.pi * 2500, rel=0.01)
    assert set(np.unique(mask)) == {0, 1}
    assert truth.measurements_px == {"BPD": 100, "OFD": 100, "HC": pytest.approx(100 * math.pi)}
    assert truth.measurements_mm["BPD"] == 25


def brute_capsule(shape, p0, p1, r):
    h, w = shape
    (x0, y0), (x1, y1) = p0, p1
    dx, dy = x1 - x0, y1 - y0
    n = 0
    for y in range(h):
        for x in range(w):
            t = min(max(((x - x0) * dx + (y - y0) * dy) / (dx * dx + dy * dy), 0.0), 1.0)
            if (x - x0 - t * dx) ** 2 + (y - y0 - t * dy) ** 2 <= r * r:
                n += 1
    return n


def test_capsule_area_and_bbox():
    cap = ((40.3, 50.5), (140.3, 50.5), 5.0)
    spec = PhantomSpec("femur", 200, 100, 2.0, capsule=cap)
    mask, truth = render_mask(spec)
    n = int((mask == 3).sum())
    assert n == brute_capsule((100, 200), *cap)
    assert n == pytest.approx(100 * 10 + math.pi * 25, rel=0.03)
    assert truth.bbox == (36.0, 46.0, 145.0, 55.0)
    assert truth.measurements_px["FL"] == pytest.approx(math.hypot(109, 9))


def test_out_of_bounds():
    with pytest.raises(SpecOutOfBounds):
        render_mask(PhantomSpec("head", 100, 100, 2.0, ellipse=(50, 50, 48, 30, 0.0)))


def test_kind_shape_mismatch():
    with pytest.raises(ValueError):
        PhantomSpec("femur", 100, 100, 2.0, ellipse=(50, 50, 10, 5, 0.0))


def test_tick_spacing():
    ticks = tick_positions(PhantomSpec("head", 300, 300, 3.0, ellipse=(150, 150, 20, 10, 0), interval_mm=10))
    ys = [t[1] for t in ticks]
    assert np.all(np.diff(ys) == 30)
    assert {t[2] for t in ticks} == {"major"}


def test_unresolvable_ticks():
    spec = PhantomSpec("head", 300, 300, 1.0, ellipse=(150, 150, 20, 10, 0), interval_mm=5)
    with pytest.raises(UnresolvableTicks):
        tick_positions(spec)
    _, truth = render_mask(spec)
    assert truth.ticks == []


def test_frame_keeps_ruler_band_clean():
    spec = disc_spec()
    mask, _ = render_mask(spec)
    img = render_frame(spec, mask)
    assert img[100, 100] == 96
    assert img.dtype == np.uint8


def test_spec_round_trip():
    spec = PhantomSpec("femur", 200, 100, 2.0, capsule=((40.0, 50.0), (140.0, 50.0), 5.0), seed=4)
    assert PhantomSpec.from_dict(spec.to_dict()) == spec


def test_perturb_zero_is_identity():
    mask, _ = render_mask(disc_spec())
    assert np.array_equal(perturb_mask(mask, 0, seed=1), mask)


def test_dilation_area_growth():
    mask, _ = render_mask(disc_spec())
    grown = morph_mask(mask, 2)
    added = int((grown == 1).sum() - (mask == 1).sum())
    assert added == pytest.approx(2 * math.pi * 50 * 2, rel=0.10)


def test_erosion_is_subset():
    mask, _ = render_mask(disc_spec())
    shrunk = morph_mask(mask, -3)
    assert np.all(mask[shrunk == 1] == 1)
    assert (shrunk == 1).sum() < (mask == 1).sum()


def test_perturb_deterministic():
    mask, _ = render_mask(disc_spec())
    assert np.array_equal(perturb_mask(mask, 3, 7), perturb_mask(mask, 3, 7))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4))
def test_morph_monotone(r1, r2):
    mask, _ = render_mask(disc_spec(r=30.0))
    lo, hi = sorted((r1, r2))
    a_lo = (morph_mask(mask, lo) == 1).sum()
    a_hi = (morph_mask(mask, hi) == 1).sum()
    assert a_lo <= a_hi
    e_lo = (morph_mask(mask, -lo) == 1).sum()
    e_hi = (morph_mask(mask, -hi) == 1).sum()
    assert e_lo >= e_hi


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["head", "abdomen", "femur"]), st.integers(0, 2**32 - 1))
def test_random_spec_renders(kind, seed):
    spec = random_spec(kind, np.random.default_rng(seed))
    mask, truth = render_mask(spec)
    assert truth.plane is PlaneClass(kind)
    assert int((mask == PlaneClass(kind).anatomy).sum()) > 0
    assert len(truth.ticks) >= 3
