"""Minimal SVG line plots for run diagnostics.

CSV is the canonical output; these renderings are convenience views of
the same records (width over time, sliding coverage, scaling and level
trajectories, window component means and their ratios). Pure string
assembly, deterministic, no plotting framework.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence

from .errors import IoError

WIDTH = 720
HEIGHT = 400
MARGIN = 56

PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#17becf",
    "#7f7f7f",
)

Series = Mapping[str, tuple[Sequence[float], Sequence[float]]]


def _finite_pairs(xs, ys):
    return [
        (float(x), float(y))
        for x, y in zip(xs, ys)
        if math.isfinite(x) and math.isfinite(y)
    ]


def render_line_svg(
    path: str | Path,
    title: str,
    series: Series,
    x_label: str = "t",
    y_label: str = "",
) -> Path:
    """Write one SVG with a polyline per named series; returns the path."""
    cleaned = {name: _finite_pairs(xs, ys) for name, (xs, ys) in series.items()}
    cleaned = {name: pts for name, pts in cleaned.items() if pts}
    all_pts = [pt for pts in cleaned.values() for pt in pts]
    if all_pts:
        x_min = min(p[0] for p in all_pts)
        x_max = max(p[0] for p in all_pts)
        y_min = min(p[1] for p in all_pts)
        y_max = max(p[1] for p in all_pts)
    else:
        x_min, x_max, y_min, y_max = 0.0, 1.0, 0.0, 1.0
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_max = y_min + 1.0

    def sx(x: float) -> float:
        return MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2 * MARGIN)

    def sy(y: float) -> float:
        return HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
        f'font-size="16" font-family="sans-serif">{title}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" '
        f'font-size="12" font-family="sans-serif" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{y_label}</text>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10" '
        f'font-family="sans-serif">{x_min:.4g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 16}" '
        f'text-anchor="end" font-size="10" font-family="sans-serif">'
        f"{x_max:.4g}</text>",
        f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" '
        f'font-size="10" font-family="sans-serif">{y_min:.4g}</text>',
        f'<text x="{MARGIN - 4}" y="{MARGIN + 4}" text-anchor="end" '
        f'font-size="10" font-family="sans-serif">{y_max:.4g}</text>',
    ]
    for i, (name, pts) in enumerate(cleaned.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * i + 10}" '
            f'font-size="11" font-family="sans-serif" fill="{color}">'
            f"{name}</text>"
        )
    parts.append("</svg>")
    path = Path(path)
    try:
        path.write_text("\n".join(parts))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path
