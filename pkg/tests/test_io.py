import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from PIL import Image

from autofb.batch import RunConfig, measure_one, run_measure_batch
from autofb.biometry import measure
from autofb.errors import IllegalLabelValue, NoInputs, UnreadableFile
from autofb.io import (
    dumps,
    load_mask,
    read_json,
    report_document,
    round_sig,
    save_gray,
    save_mask,
    validate_report,
)
from autofb.overlay import render_overlay
from autofb.phantom import PhantomSpec, random_spec, render_frame, render_mask, render_ruler
from autofb.scale import fixed_scale

SVG = "{http://www.w3.org/2000/svg}"


def write_corpus(root, kinds, seed=3):
    rng = np.random.default_rng(seed)
    (root / "masks").mkdir()
    (root / "images").mkdir()
    truths = {}
    for i, kind in enumerate(kinds):
        spec = random_spec(kind, rng)
        mask, truth = render_mask(spec)
        save_mask(root / "masks" / f"{kind}_{i}.png", mask)
        save_gray(root / "images" / f"{kind}_{i}.png", render_frame(spec, mask))
        truths[f"{kind}_{i}"] = truth
    return truths


# ------------------------------------------------------------ masks
def test_zero_png(tmp_path):
    Image.fromarray(np.zeros((5, 7), np.uint8)).save(tmp_path / "z.png")
    m = load_mask(tmp_path / "z.png")
    assert m.shape == (5, 7) and not m.any()


def test_illegal_value_reports_first_pixel(tmp_path):
    arr = np.zeros((6, 6), np.uint8)
    arr[2, 4] = 7
    arr[5, 0] = 9
    Image.fromarray(arr).save(tmp_path / "bad.png")
    with pytest.raises(IllegalLabelValue) as info:
        load_mask(tmp_path / "bad.png")
    assert (info.value.value, info.value.x, info.value.y) == (7, 4, 2)


def test_unreadable(tmp_path):
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(UnreadableFile):
        load_mask(tmp_path / "junk.png")
    Image.fromarray(np.zeros((4, 4, 3), np.uint8)).save(tmp_path / "rgb.png")
    with pytest.raises(UnreadableFile):
        load_mask(tmp_path / "rgb.png")


def test_phantom_round_trip(tmp_path):
    mask, _ = render_mask(random_spec("abdomen", np.random.default_rng(1)))
    save_mask(tmp_path / "m.png", mask)
    assert np.array_equal(load_mask(tmp_path / "m.png"), mask)


def test_round_sig():
    assert round_sig(123.456789) == 123.457
    assert round_sig(0.000123456789) == 0.000123457
    assert round_sig(7) == 7 and round_sig(0.0) == 0.0
    assert dumps({"b": 1.0 / 3, "a": [2.0]}) == '{\n  "a": [\n    2.0\n  ],\n  "b": 0.333333\n}\n'


# ------------------------------------------------------------ overlay
def head_report():
    spec = PhantomSpec("head", 300, 240, 4.0, ellipse=(160.0, 120.0, 70.0, 50.0, 0.6))
    mask, _ = render_mask(spec)
    return spec, mask, measure(mask, fixed_scale(4.0))


def test_head_overlay_elements():
    spec, mask, rep = head_report()
    root = ET.fromstring(render_overlay(render_frame(spec, mask), rep))
    assert len(root.findall(f".//{SVG}ellipse")) == 1
    assert len(root.findall(f".//{SVG}line")) == 2
    texts = root.findall(f".//{SVG}text")
    assert len(texts) == 3
    assert all(t.text.endswith(" mm") for t in texts)
    assert len(root.findall(f"{SVG}image")) == 1


def test_overlay_ellipse_matches_fit():
    _, _, rep = head_report()
    root = ET.fromstring(render_overlay(None, rep, width=300, height=240))
    el = root.find(f".//{SVG}ellipse")
    e = rep.fitted
    assert float(el.get("cx")) == pytest.approx(e.cx, abs=1e-3)
    assert float(el.get("cy")) == pytest.approx(e.cy, abs=1e-3)
    assert float(el.get("rx")) == pytest.approx(e.a, abs=1e-3)
    assert float(el.get("ry")) == pytest.approx(e.b, abs=1e-3)
    assert float(el.get("data-theta")) == pytest.approx(e.theta, abs=1e-5)
    assert f"rotate({math.degrees(e.theta):.4f}"[:12] in el.get("transform")


def test_femur_overlay_elements():
    mask = np.zeros((60, 60), np.uint8)
    mask[10:51, 5:36] = 3
    root = ET.fromstring(render_overlay(None, measure(mask, fixed_scale(2.0)).to_dict(), 60, 60))
    assert len(root.findall(f".//{SVG}rect")) == 1
    (line,) = root.findall(f".//{SVG}line")
    assert [float(line.get(k)) for k in ("x1", "y1", "x2", "y2")] == [5, 10, 35, 50]
    (text,) = root.findall(f".//{SVG}text")
    assert text.text == "FL 25.0 mm"


# ------------------------------------------------------------ batch
def test_batch_matches_truth(tmp_path):
    truths = write_corpus(tmp_path, ["head", "abdomen", "femur"])
    doc = run_measure_batch(RunConfig(tmp_path / "masks", tmp_path / "images"))
    validate_report(json.loads(dumps(doc)))
    assert doc["summary"] == {"n_images": 3, "n_ok": 3, "n_failed": 0}
    for image_id, truth in truths.items():
        e = doc["entries"][image_id]
        assert e["scale"]["px_per_mm"] == pytest.approx(truth.spec.px_per_mm, rel=0.01)
        for name, want in truth.measurements_px.items():
            got = e["measurements"][name]["value_px"]
            if name in ("HC", "AC"):
                assert got == pytest.approx(want, rel=0.02)
            else:
                assert got == pytest.approx(want, abs=1.0)


def test_failure_isolation(tmp_path):
    write_corpus(tmp_path, ["head", "femur"])
    cfg = RunConfig(tmp_path / "masks", tmp_path / "images")
    before = run_measure_batch(cfg)
    save_mask(tmp_path / "masks" / "blank.png", np.zeros((512, 640), np.uint8))
    ruler = PhantomSpec("head", 640, 512, 5.0, ellipse=(300.0, 250.0, 100.0, 80.0, 0.0))
    save_gray(tmp_path / "images" / "blank.png", render_ruler(ruler))
    after = run_measure_batch(cfg)
    assert after["entries"]["blank"]["error"]["code"] == "NoAnatomy"
    for k, v in before["entries"].items():
        assert after["entries"][k] == v
    validate_report(json.loads(dumps(after)))


def test_missing_frame_is_per_image_error(tmp_path):
    write_corpus(tmp_path, ["head"])
    (tmp_path / "images" / "head_0.png").unlink()
    entry = measure_one("head_0", RunConfig(tmp_path / "masks", tmp_path / "images"))
    assert entry["status"] == "error" and entry["error"]["code"] == "UnreadableFile"


def test_empty_dir(tmp_path):
    (tmp_path / "m").mkdir()
    with pytest.raises(NoInputs):
        run_measure_batch(RunConfig(tmp_path / "m", px_per_mm=1.0))


def test_fixed_mode_needs_positive_scale(tmp_path):
    with pytest.raises(ValueError):
        RunConfig(tmp_path, px_per_mm=0.0).validate()


def test_batch_byte_identical(tmp_path):
    write_corpus(tmp_path, ["head", "abdomen", "femur", "head"])
    cfg = RunConfig(tmp_path / "masks", tmp_path / "images")
    a = dumps(run_measure_batch(cfg))
    b = dumps(run_measure_batch(cfg))
    par = dumps(run_measure_batch(RunConfig(tmp_path / "masks", tmp_path / "images", workers=2)))
    assert a == b == par


def test_schema_rejects_bad_entry():
    import jsonschema

    doc = report_document({"x": {"status": "ok", "plane": "head"}})
    with pytest.raises(jsonschema.ValidationError):
        validate_report(doc)


def test_read_json_error(tmp_path):
    (tmp_path / "r.json").write_text("{")
    with pytest.raises(UnreadableFile):
        read_json(tmp_path / "r.json")
