"""Minimal deterministic SVG line plots (no plotting dependency)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
WIDTH, HEIGHT = 720, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)


def _nice_ticks(lo, hi, n=6):
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * abs(hi or 1):
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt_tick(v):
    return f"{v:.4g}"


def line_plot(series, title, xlabel, ylabel):
    """``series``: list of ``(label, x, y)``. Non-finite points split the polyline."""
    xs = np.concatenate([np.asarray(x, float) for _, x, _ in series]) if series else np.array([0.0])
    ys = np.concatenate([np.asarray(y, float) for _, _, y in series]) if series else np.array([0.0])
    ok = np.isfinite(xs) & np.isfinite(ys)
    if not ok.any():
        xs, ys, ok = np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([True, True])
    x0, x1 = float(xs[ok].min()), float(xs[ok].max())
    y0, y1 = float(ys[ok].min()), float(ys[ok].max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
    y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN["top"] + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444"/>',
    ]
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y:.2f}" x2="{MARGIN["left"] + pw}" y2="{Y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt_tick(t)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16 {MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for i, (label, x, y) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        run = []
        for a, b in zip(x, y):
            if math.isfinite(a) and math.isfinite(b):
                run.append(f"{px(a):.2f},{py(b):.2f}")
            elif run:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{" ".join(run)}"/>')
                run = []
        if run:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{" ".join(run)}"/>')
        ly = MARGIN["top"] + 14 + 16 * i
        lx = MARGIN["left"] + pw - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series, title, xlabel, ylabel):
    with open(path, "w", newline="\n") as fh:
        fh.write(line_plot(series, title, xlabel, ylabel))


def curve_svg(path, curve, title, xlabel, ylabel):
    series = [("measured", curve.x, curve.measured), ("predicted", curve.x, curve.predicted)]
    if any(math.isfinite(a) for a in curve.analytic):
        series.append(("analytic", curve.x, curve.analytic))
    write_svg(path, series, title, xlabel, ylabel)
