"""Minimal native SVG line charts (axes, ticks, polylines, legend)."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass
class Series:
    name: str
    xs: list
    ys: list
    color: str | None = None
    dashed: bool = False
    markers: bool = False


@dataclass
class Chart:
    title: str
    x_label: str
    y_label: str
    series: list = field(default_factory=list)
    vlines: list = field(default_factory=list)  # (x, label, color)
    x_ticks: list | None = None  # (value, label) pairs for categorical axes
    y_min: float | None = None
    width: int = 640
    height: int = 400


def nice_ticks(lo, hi, n=5):
    """Round tick positions covering [lo, hi]."""
    if not math.isfinite(lo) or not math.isfinite(hi):
        return [0.0, 1.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    if ticks[-1] < hi:
        ticks.append(round(t, 12))
    return ticks


def _fmt(v):
    if abs(v) >= 1000 or v == int(v):
        return f"{v:.0f}"
    if abs(v) >= 1:
        return f"{v:.1f}"
    return f"{v:.3g}"


def render(chart: Chart) -> str:
    W, H = chart.width, chart.height
    left, right, top, bottom = 64, 150, 36, 52
    pw, ph = W - left - right, H - top - bottom
    xs = [x for s in chart.series for x in s.xs] + [v[0] for v in chart.vlines]
    ys = [y for s in chart.series for y in s.ys if y is not None and math.isfinite(y)]
    if chart.x_ticks:
        xs += [t[0] for t in chart.x_ticks]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if chart.x_ticks:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_lo = min(ys) if ys else 0.0
    y_hi = max(ys) if ys else 1.0
    if chart.y_min is not None:
        y_lo = min(y_lo, chart.y_min)
    yt = nice_ticks(y_lo, y_hi)
    y_lo, y_hi = yt[0], yt[-1]
    xt = chart.x_ticks or [(t, _fmt(t)) for t in nice_ticks(x_lo, x_hi)]
    if not chart.x_ticks:
        x_lo, x_hi = xt[0][0], xt[-1][0]
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(W), height=str(H),
                     viewBox=f"0 0 {W} {H}", **{"font-family": "sans-serif", "font-size": "11"})
    ET.SubElement(svg, "rect", x="0", y="0", width=str(W), height=str(H), fill="white")
    ET.SubElement(svg, "text", x=str(left + pw / 2), y="20", **{"text-anchor": "middle", "font-size": "14"}).text = chart.title
    axis = dict(stroke="black", **{"stroke-width": "1"})
    ET.SubElement(svg, "line", x1=str(left), y1=str(top + ph), x2=str(left + pw), y2=str(top + ph), **axis)
    ET.SubElement(svg, "line", x1=str(left), y1=str(top), x2=str(left), y2=str(top + ph), **axis)
    for v in yt:
        y = py(v)
        ET.SubElement(svg, "line", x1=str(left - 4), y1=f"{y:.2f}", x2=str(left), y2=f"{y:.2f}", **axis)
        ET.SubElement(svg, "line", x1=str(left), y1=f"{y:.2f}", x2=str(left + pw), y2=f"{y:.2f}",
                      stroke="#e0e0e0", **{"stroke-width": "0.5"})
        ET.SubElement(svg, "text", x=str(left - 7), y=f"{y + 4:.2f}", **{"text-anchor": "end"}).text = _fmt(v)
    for v, lab in xt:
        x = px(v)
        ET.SubElement(svg, "line", x1=f"{x:.2f}", y1=str(top + ph), x2=f"{x:.2f}", y2=str(top + ph + 4), **axis)
        ET.SubElement(svg, "text", x=f"{x:.2f}", y=str(top + ph + 17), **{"text-anchor": "middle"}).text = str(lab)
    ET.SubElement(svg, "text", x=str(left + pw / 2), y=str(H - 10), **{"text-anchor": "middle"}).text = chart.x_label
    ET.SubElement(svg, "text", x="14", y=str(top + ph / 2),
                  transform=f"rotate(-90 14 {top + ph / 2})", **{"text-anchor": "middle"}).text = chart.y_label

    for i, s in enumerate(chart.series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(s.xs, s.ys) if y is not None and math.isfinite(y)]
        if len(pts) > 1:
            attrs = {"fill": "none", "stroke": color, "stroke-width": "1.6"}
            if s.dashed:
                attrs["stroke-dasharray"] = "5,3"
            ET.SubElement(svg, "polyline", points=" ".join(f"{x:.2f},{y:.2f}" for x, y in pts), **attrs)
        if s.markers or len(pts) == 1:
            for x, y in pts:
                ET.SubElement(svg, "circle", cx=f"{x:.2f}", cy=f"{y:.2f}", r="3", fill=color)
        ly = top + 12 + 16 * i
        ET.SubElement(svg, "line", x1=str(left + pw + 12), y1=str(ly), x2=str(left + pw + 32), y2=str(ly),
                      stroke=color, **{"stroke-width": "2"})
        ET.SubElement(svg, "text", x=str(left + pw + 36), y=str(ly + 4)).text = s.name
    for x, label, color in chart.vlines:
        xx = px(x)
        ET.SubElement(svg, "line", x1=f"{xx:.2f}", y1=str(top), x2=f"{xx:.2f}", y2=str(top + ph),
                      stroke=color, **{"stroke-width": "1.4", "stroke-dasharray": "6,4"})
        ET.SubElement(svg, "text", x=f"{xx + 4:.2f}", y=str(top + 12), fill=color).text = label
    return ET.tostring(svg, encoding="unicode") + "\n"
