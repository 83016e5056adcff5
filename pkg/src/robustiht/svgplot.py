"""Minimal dependency-free SVG line charts for the experiment CSVs."""

from __future__ import annotations

import math
from pathlib import Path

WIDTH, HEIGHT = 640, 420
MARGIN = 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _spans(series):
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    return x_lo, x_hi, y_lo, y_hi


def write_line_chart(path, series: dict, title: str, xlabel: str, ylabel: str, log_y: bool = False):
    """Write one polyline per series; series maps label -> [(x, y), ...]."""
    cleaned = {}
    for label, pts in series.items():
        kept = [(float(x), float(y)) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
        if log_y:
            kept = [(x, math.log10(y)) for x, y in kept if y > 0]
        if kept:
            cleaned[label] = sorted(kept)
    if not cleaned:
        raise ValueError("nothing to plot")
    x_lo, x_hi, y_lo, y_hi = _spans(cleaned)

    def sx(x):
        return MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 16}" text-anchor="middle">{xlabel}</text>',
        f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {HEIGHT / 2})">{("log10 " if log_y else "") + ylabel}</text>',
    ]
    for tick in (x_lo, (x_lo + x_hi) / 2, x_hi):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{HEIGHT - MARGIN + 16}" '
            f'text-anchor="middle">{tick:.4g}</text>'
        )
    for tick in (y_lo, (y_lo + y_hi) / 2, y_hi):
        parts.append(
            f'<text x="{MARGIN - 6}" y="{sy(tick):.1f}" text-anchor="end">{tick:.4g}</text>'
        )
    for i, (label, pts) in enumerate(sorted(cleaned.items())):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * i}" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
