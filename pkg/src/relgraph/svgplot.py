"""Tiny dependency-free SVG charts (scatter with optional fitted curve,
multi-series line).  Output is a single self-contained file and byte
deterministic for identical inputs."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 480
MARGIN = 60

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _axes(x_lo, x_hi, y_lo, y_hi, x_label, y_label, title):
    def sx(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 16}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>',
        f'<text x="18" y="{HEIGHT / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT / 2:.0f})">{y_label}</text>',
    ]
    for i in range(5):
        fx = x_lo + (x_hi - x_lo) * i / 4
        fy = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<text x="{sx(fx):.1f}" y="{HEIGHT - MARGIN + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_fmt(fx)}</text>')
        parts.append(f'<text x="{MARGIN - 8}" y="{sy(fy) + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_fmt(fy)}</text>')
    return parts, sx, sy


def _bounds(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def scatter_svg(path, series, x_label="", y_label="", title="",
                curves=None, highlight=None):
    """Scatter chart.

    series: list of (label, [(x, y), ...]); curves: optional list of
    (label, [(x, y), ...]) drawn as polylines; highlight: one (x, y)
    drawn as a large marked point.
    """
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    for _, pts in (curves or []):
        xs += [x for x, _ in pts]
        ys += [y for _, y in pts]
    if highlight is not None:
        xs.append(highlight[0])
        ys.append(highlight[1])
    x_lo, x_hi = _bounds(xs)
    y_lo, y_hi = _bounds(ys)
    parts, sx, sy = _axes(x_lo, x_hi, y_lo, y_hi, x_label, y_label, title)
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        for x, y in pts:
            if math.isfinite(x) and math.isfinite(y):
                parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="4" '
                             f'fill="{color}" fill-opacity="0.8"/>')
        parts.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * i + 10}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{label}</text>')
    for i, (label, pts) in enumerate(curves or []):
        color = _PALETTE[(len(series) + i) % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts
                          if math.isfinite(x) and math.isfinite(y))
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
    if highlight is not None:
        parts.append(f'<circle cx="{sx(highlight[0]):.2f}" '
                     f'cy="{sy(highlight[1]):.2f}" r="7" fill="none" '
                     f'stroke="black" stroke-width="2"/>')
    parts.append("</svg>")
    _write(path, parts)


def line_svg(path, series, x_label="", y_label="", title=""):
    """Line chart; series: list of (label, [(x, y), ...])."""
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts if math.isfinite(y)]
    x_lo, x_hi = _bounds(xs)
    y_lo, y_hi = _bounds(ys)
    parts, sx, sy = _axes(x_lo, x_hi, y_lo, y_hi, x_label, y_label, title)
    for i, (label, pts) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts
                          if math.isfinite(y))
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * i + 10}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    _write(path, parts)


def _write(path, parts):
    import os
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(parts) + "\n")
    os.replace(tmp, path)
