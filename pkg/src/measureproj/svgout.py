"""Deterministic SVG and CSV output, plus loaders for round-tripping.

Coordinates live in [0,1]^2 with y up; the SVG canvas flips y so images come
out in the usual raster orientation. Documents are built from literal
templates with a fixed attribute order and repr-stable floats, so identical
inputs produce identical bytes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

import numpy as np

from .measure import ValidationError

_HEADER = ('<?xml version="1.0" encoding="UTF-8"?>\n'
           '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
           'width="{size}" height="{size}" viewBox="0 0 {size} {size}">\n')


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def _to_canvas(points: np.ndarray, size: float) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size and pts.shape[1] != 2:
        raise ValidationError("SVG output needs 2-D points")
    out = np.empty_like(pts)
    if pts.size:
        out[:, 0] = pts[:, 0] * size
        out[:, 1] = (1.0 - pts[:, 1]) * size
    return out


def render_svg_points(points, size: int = 512, radius: float = 2.0,
                      comments=()) -> str:
    """SVG document with one black circle per point."""
    canvas = _to_canvas(points, size)
    lines = [_HEADER.format(size=size)]
    for text in comments:
        lines.append(f"<!-- {text} -->\n")
    lines.append(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    for x, y in canvas:
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(radius)}" '
                     'fill="black"/>\n')
    lines.append("</svg>\n")
    return "".join(lines)


def render_svg_polyline(points, size: int = 512, width: float = 1.0,
                        comments=()) -> str:
    """SVG document with a single open polyline through the points."""
    canvas = _to_canvas(points, size)
    lines = [_HEADER.format(size=size)]
    for text in comments:
        lines.append(f"<!-- {text} -->\n")
    lines.append(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in canvas)
    lines.append(f'<polyline points="{coords}" fill="none" stroke="black" '
                 f'stroke-width="{_fmt(width)}"/>\n')
    lines.append("</svg>\n")
    return "".join(lines)


def parse_svg_points(text: str, size: float | None = None) -> np.ndarray:
    """Recover unit-square coordinates from an emitted dot SVG."""
    root = ET.fromstring(text)
    size = size if size is not None else float(root.attrib["width"])
    ns = "{http://www.w3.org/2000/svg}"
    pts = [(float(c.attrib["cx"]), float(c.attrib["cy"]))
           for c in root.iter(f"{ns}circle")]
    arr = np.array(pts, dtype=float).reshape(-1, 2)
    if arr.size:
        arr[:, 0] /= size
        arr[:, 1] = 1.0 - arr[:, 1] / size
    return arr


def parse_svg_polyline(text: str, size: float | None = None) -> np.ndarray:
    root = ET.fromstring(text)
    size = size if size is not None else float(root.attrib["width"])
    ns = "{http://www.w3.org/2000/svg}"
    node = next(root.iter(f"{ns}polyline"), None)
    if node is None:
        return np.zeros((0, 2))
    pairs = node.attrib["points"].split()
    arr = np.array([[float(v) for v in p.split(",")] for p in pairs])
    arr[:, 0] /= size
    arr[:, 1] = 1.0 - arr[:, 1] / size
    return arr


def write_points_csv(path, points) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    header = ",".join(f"x{a + 1}" for a in range(d))
    rows = [header] + [",".join(repr(float(v)) for v in row) for row in pts]
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def read_points_csv(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("x1"):
        raise ValidationError(f"{path}: not a points CSV")
    return np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


def write_trace_csv(path, trace) -> None:
    rows = ["iteration,J,step_norm"]
    for i, J in enumerate(trace.energies):
        step = repr(float(trace.step_norms[i - 1])) if 0 < i <= len(trace.step_norms) else ""
        rows.append(f"{i},{repr(float(J))},{step}")
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")


def write_curve_csv(path, ts, points) -> None:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = pts.shape[1]
    header = "t," + ",".join(f"x{a + 1}" for a in range(d))
    rows = [header]
    for t, row in zip(np.asarray(ts, dtype=float), pts):
        rows.append(repr(float(t)) + "," + ",".join(repr(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(rows) + "\n")
