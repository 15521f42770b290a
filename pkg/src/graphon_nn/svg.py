"""Static SVG line charts with optional log axes and error bars."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@dataclass
class Series:
    label: str
    x: list
    y: list
    yerr: list = field(default_factory=list)
    dashed: bool = False


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0**k for k in range(a, b + 1)]
    step = 10 ** math.floor(math.log10((hi - lo) or 1.0))
    start = math.floor(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 2)]


def _fmt(v):
    return f"{v:.0e}" if (v != 0 and (abs(v) < 1e-2 or abs(v) >= 1e4)) else f"{v:g}"


def line_chart(series, title="", xlabel="", ylabel="", logx=False, logy=False,
               width=640, height=420) -> str:
    """Render ``series`` into an SVG document string.

    Points with nonpositive coordinates on a log axis are dropped.
    """
    def ok(x, y):
        return (not logx or x > 0) and (not logy or y > 0) and math.isfinite(x) and math.isfinite(y)

    pts = [(x, y) for s in series for x, y in zip(s.x, s.y) if ok(x, y)]
    for s in series:
        for x, y, e in zip(s.x, s.y, s.yerr):
            if ok(x, y - e):
                pts.append((x, y - e))
            if ok(x, y + e):
                pts.append((x, y + e))
    if not pts:
        pts = [(1.0, 1.0), (10.0, 10.0)]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    xlo, xhi, ylo, yhi = min(xs), max(xs), min(ys), max(ys)
    if xlo == xhi:
        xlo, xhi = (xlo / 2, xhi * 2) if logx else (xlo - 1, xhi + 1)
    if ylo == yhi:
        ylo, yhi = (ylo / 2, yhi * 2) if logy else (ylo - 1, yhi + 1)
    xt, yt = _ticks(xlo, xhi, logx), _ticks(ylo, yhi, logy)
    xlo, xhi = min(xlo, xt[0]), max(xhi, xt[-1])
    ylo, yhi = min(ylo, yt[0]), max(yhi, yt[-1])

    left, right, top, bottom = 70, 160, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def tx(x):
        a, b, v = (math.log10(xlo), math.log10(xhi), math.log10(x)) if logx else (xlo, xhi, x)
        return left + pw * (v - a) / (b - a)

    def ty(y):
        a, b, v = (math.log10(ylo), math.log10(yhi), math.log10(y)) if logy else (ylo, yhi, y)
        return top + ph * (1 - (v - a) / (b - a))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2}" y="20" text-anchor="middle" font-size="13">'
           f'{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in xt:
        if xlo <= v <= xhi:
            x = tx(v)
            out.append(f'<line x1="{x:.1f}" y1="{top}" x2="{x:.1f}" y2="{top + ph}" '
                       f'stroke="#ddd"/>')
            out.append(f'<text x="{x:.1f}" y="{top + ph + 15}" text-anchor="middle">'
                       f'{_fmt(v)}</text>')
    for v in yt:
        if ylo <= v <= yhi:
            y = ty(v)
            out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" '
                       f'stroke="#ddd"/>')
            out.append(f'<text x="{left - 5}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2})">{escape(ylabel)}</text>')

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        good = [(x, y) for x, y in zip(s.x, s.y) if ok(x, y)]
        if good:
            path = " ".join(f"{tx(x):.1f},{ty(y):.1f}" for x, y in good)
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                       f'stroke-width="1.5"{dash}/>')
            out.extend(f'<circle cx="{tx(x):.1f}" cy="{ty(y):.1f}" r="2.5" fill="{color}"/>'
                       for x, y in good)
        for x, y, e in zip(s.x, s.y, s.yerr):
            if ok(x, y - e) and ok(x, y + e):
                out.append(f'<line x1="{tx(x):.1f}" y1="{ty(y - e):.1f}" x2="{tx(x):.1f}" '
                           f'y2="{ty(y + e):.1f}" stroke="{color}"/>')
        ly = top + 15 + 16 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_chart(path, *args, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(line_chart(*args, **kwargs))
