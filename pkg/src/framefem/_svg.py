"""Minimal deterministic SVG line plots (axes, ticks, polylines, legend)."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=160, top=40, bottom=50)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v: float) -> str:
    return "%.6g" % v


def line_plot(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document.

    Non-finite points are dropped.  Log scales are the caller's business:
    pass already transformed values and say so in ``ylabel``.
    """
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys) if math.isfinite(x) and math.isfinite(y)]
        if pts:
            clean[label] = pts
    allx = [p[0] for pts in clean.values() for p in pts] or [0.0, 1.0]
    ally = [p[1] for pts in clean.values() for p in pts] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * ph

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" viewBox="0 0 %d %d">' % (WIDTH, HEIGHT, WIDTH, HEIGHT),
        '<rect width="100%" height="100%" fill="white"/>',
        '<text x="%d" y="24" font-size="15" font-family="sans-serif">%s</text>' % (MARGIN["left"], escape(title)),
        '<rect x="%d" y="%d" width="%d" height="%d" fill="none" stroke="black"/>' % (MARGIN["left"], MARGIN["top"], pw, ph),
    ]
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            parts.append('<line x1="%.2f" y1="%d" x2="%.2f" y2="%d" stroke="black"/>' % (sx(t), MARGIN["top"] + ph, sx(t), MARGIN["top"] + ph + 5))
            parts.append('<text x="%.2f" y="%d" font-size="11" text-anchor="middle" font-family="sans-serif">%s</text>' % (sx(t), MARGIN["top"] + ph + 18, _fmt(t)))
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            parts.append('<line x1="%d" y1="%.2f" x2="%d" y2="%.2f" stroke="#dddddd"/>' % (MARGIN["left"], sy(t), MARGIN["left"] + pw, sy(t)))
            parts.append('<text x="%d" y="%.2f" font-size="11" text-anchor="end" font-family="sans-serif">%s</text>' % (MARGIN["left"] - 6, sy(t) + 4, _fmt(t)))
    parts.append('<text x="%.1f" y="%d" font-size="12" text-anchor="middle" font-family="sans-serif">%s</text>' % (MARGIN["left"] + pw / 2, HEIGHT - 12, escape(xlabel)))
    parts.append('<text x="16" y="%.1f" font-size="12" text-anchor="middle" font-family="sans-serif" transform="rotate(-90 16 %.1f)">%s</text>' % (MARGIN["top"] + ph / 2, MARGIN["top"] + ph / 2, escape(ylabel)))
    for k, (label, pts) in enumerate(clean.items()):
        color = COLORS[k % len(COLORS)]
        coords = " ".join("%.2f,%.2f" % (sx(x), sy(y)) for x, y in pts)
        parts.append('<polyline fill="none" stroke="%s" stroke-width="1.5" points="%s"/>' % (color, coords))
        ly = MARGIN["top"] + 14 + 18 * k
        lx = MARGIN["left"] + pw + 12
        parts.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" stroke-width="2"/>' % (lx, ly, lx + 20, ly, color))
        parts.append('<text x="%d" y="%d" font-size="11" font-family="sans-serif">%s</text>' % (lx + 26, ly + 4, escape(label)))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
