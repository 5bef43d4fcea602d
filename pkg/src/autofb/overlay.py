"""SVG overlays of fitted shapes and measurements on the source frame."""
from __future__ import annotations

import base64
import io as _io
import math
import xml.etree.ElementTree as ET

import numpy as np

SVG_NS = "http://www.w3.org/2000/svg"
XLINK_NS = "http://www.w3.org/1999/xlink"

FIT_COLOUR = "#00e676"
AXIS_COLOUR = "#ffd600"
TEXT_COLOUR = "#ffffff"


def _num(v: float) -> str:
    return repr(float(v))


def _png_data_uri(image) -> str:
    from PIL import Image

    buf = _io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def _label(parent, x, y, text, name):
    el = ET.SubElement(parent, "text", {
        "x": _num(x), "y": _num(y), "class": "label", "data-name": name,
        "fill": TEXT_COLOUR, "font-size": "12", "font-family": "sans-serif",
        "stroke": "#000000", "stroke-width": "0.3",
    })
    el.text = text


def _axis(parent, p, q, name):
    ET.SubElement(parent, "line", {
        "x1": _num(p[0]), "y1": _num(p[1]), "x2": _num(q[0]), "y2": _num(q[1]),
        "class": "axis", "data-name": name, "stroke": AXIS_COLOUR, "stroke-width": "1.5",
    })


def render_overlay(image, report, width=None, height=None) -> str:
    """SVG document drawing ``report``'s fit over ``image`` in pixel coordinates.

    ``report`` is a :class:`BiometryReport` or its ``to_dict()`` form (as
    stored in a report document). ``image`` may be None, in which case
    ``width`` and ``height`` size the canvas.
    """
    if hasattr(report, "to_dict"):
        report = report.to_dict()
    if image is not None:
        height, width = np.asarray(image).shape[:2]
    if width is None or height is None:
        raise ValueError("need an image or an explicit canvas size")

    svg = ET.Element("svg", {
        "xmlns": SVG_NS, "xmlns:xlink": XLINK_NS,
        "width": str(width), "height": str(height), "viewBox": f"0 0 {width} {height}",
    })
    if image is not None:
        ET.SubElement(svg, "image", {"x": "0", "y": "0", "width": str(width), "height": str(height),
                                     "xlink:href": _png_data_uri(image)})
    g = ET.SubElement(svg, "g", {"class": "biometry", "data-plane": report["plane"]})
    fit = report["fit"]
    meas = report["measurements"]

    if fit["type"] == "ellipse":
        cx, cy, a, b, theta = (float(fit[k]) for k in ("cx", "cy", "a", "b", "theta"))
        ET.SubElement(g, "ellipse", {
            "cx": _num(cx), "cy": _num(cy), "rx": _num(a), "ry": _num(b),
            "transform": f"rotate({_num(math.degrees(theta))} {_num(cx)} {_num(cy)})",
            "data-theta": _num(theta), "class": "fit",
            "fill": "none", "stroke": FIT_COLOUR, "stroke-width": "2",
        })
        c, s = math.cos(theta), math.sin(theta)
        major = ((cx - a * c, cy - a * s), (cx + a * c, cy + a * s))
        minor = ((cx + b * s, cy - b * c), (cx - b * s, cy + b * c))
        if report["plane"] == "head":
            names = {"major": "OFD", "minor": "BPD", "circ": "HC"}
        else:
            # TAD is whichever axis is closer to horizontal
            horizontal_major = min(theta % math.pi, math.pi - theta % math.pi) <= math.pi / 4 + 1e-12
            names = {"major": "TAD" if horizontal_major else "APAD",
                     "minor": "APAD" if horizontal_major else "TAD", "circ": "AC"}
        _axis(g, *major, names["major"])
        _axis(g, *minor, names["minor"])
        for i, key in enumerate(("major", "minor", "circ")):
            name = names[key]
            _label(g, 6, 16 + 14 * i, f"{name} {meas[name]['value_mm']:.1f} mm", name)
    else:
        x0, y0, x1, y1 = (float(fit[k]) for k in ("min_x", "min_y", "max_x", "max_y"))
        ET.SubElement(g, "rect", {
            "x": _num(x0), "y": _num(y0), "width": _num(x1 - x0), "height": _num(y1 - y0),
            "class": "fit", "fill": "none", "stroke": FIT_COLOUR, "stroke-width": "2",
        })
        _axis(g, (x0, y0), (x1, y1), "FL")
        _label(g, 6, 16, f"FL {meas['FL']['value_mm']:.1f} mm", "FL")
    return ET.tostring(svg, encoding="unicode")
