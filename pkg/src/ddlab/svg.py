"""Hand-rolled minimal SVG line charts.

Pure presentation: emitting a chart never changes any CSV content. Only
what the verification figures need: polylines, point markers, vertical
error bars, a horizontal reference line, linear or log-10 axes.
"""

from __future__ import annotations

import math

__all__ = ["Series", "line_chart"]

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 60, 20, 30, 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


class Series:
    def __init__(self, xs, ys, label="", err=None, marker=False):
        self.xs = list(map(float, xs))
        self.ys = list(map(float, ys))
        self.err = None if err is None else list(map(float, err))
        self.label = label
        self.marker = marker


def _scale(vals, log):
    vals = [v for v in vals if not log or v > 0]
    lo, hi = min(vals), max(vals)
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi == lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(path, series: list[Series], title="", xlabel="", ylabel="",
               hline: float | None = None, logx=False, logy=False) -> None:
    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for y in s.ys]
    if hline is not None:
        ys.append(hline)
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = _scale(xs, logx)
    y0, y1 = _scale(ys, logy)

    def px(x):
        v = math.log10(x) if logx else x
        return _ML + (v - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(y):
        v = math.log10(y) if logy else y
        return _H - _MB - (v - y0) / (y1 - y0) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#888"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        vx = x0 + frac * (x1 - x0)
        vy = y0 + frac * (y1 - y0)
        lx = 10**vx if logx else vx
        ly = 10**vy if logy else vy
        parts.append(f'<text x="{_ML + frac * (_W - _ML - _MR):.1f}" y="{_H - _MB + 16}" '
                     f'text-anchor="middle" font-size="10">{lx:.3g}</text>')
        parts.append(f'<text x="{_ML - 6}" y="{_H - _MB - frac * (_H - _MT - _MB):.1f}" '
                     f'text-anchor="end" font-size="10">{ly:.3g}</text>')
    if hline is not None and (not logy or hline > 0):
        parts.append(f'<line x1="{_ML}" x2="{_W - _MR}" y1="{py(hline):.2f}" y2="{py(hline):.2f}" '
                     'stroke="#555" stroke-dasharray="6 4"/>')
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.xs, s.ys)
                       if (not logx or x > 0) and (not logy or y > 0))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if s.err is not None:
            for x, y, e in zip(s.xs, s.ys, s.err):
                lo, hi = y - e, y + e
                if logy:
                    lo = max(lo, 10**y0)
                parts.append(f'<line x1="{px(x):.2f}" x2="{px(x):.2f}" y1="{py(lo):.2f}" '
                             f'y2="{py(hi):.2f}" stroke="{color}"/>')
        if s.marker:
            for x, y in zip(s.xs, s.ys):
                if (not logx or x > 0) and (not logy or y > 0):
                    parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" fill="{color}"/>')
        if s.label:
            parts.append(f'<text x="{_W - _MR - 8}" y="{_MT + 16 + 14 * i}" text-anchor="end" '
                         f'font-size="11" fill="{color}">{s.label}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
