"""Minimal deterministic SVG emitters (scatter and line plots).

Hand-rolled on purpose: byte-identical output for identical input, no
timestamps or generated ids, diffable in review.
"""

from __future__ import annotations

import numpy as np

_HEADER = ('<?xml version="1.0" encoding="UTF-8"?>\n'
           '<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           'viewBox="0 0 {w} {h}">\n')


def _frame(lines, width, height, title):
    out = [_HEADER.format(w=width, h=height)]
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="16" font-size="13" '
                   f'text-anchor="middle" font-family="monospace">{title}</text>\n')
    out.extend(lines)
    out.append("</svg>\n")
    return "".join(out)


def scatter_svg(points, title: str = "", size: int = 480,
                radius: float = 1.6, extent: float | None = None) -> str:
    """Scatter plot of complex points on a square canvas."""
    pts = np.asarray(points, dtype=complex)
    if extent is None:
        extent = float(np.max(np.abs(pts))) * 1.08 + 1e-9
    half = size / 2.0
    scale = (half - 10.0) / extent
    lines = []
    for z in pts:
        cx = half + z.real * scale
        cy = half - z.imag * scale
        lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{radius}" '
                     f'fill="black"/>\n')
    return _frame(lines, size, size, title)


def line_svg(x, ys, labels, title: str = "", width: int = 560,
             height: int = 360) -> str:
    """Overlaid polylines sharing an x axis; ys is a list of arrays."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in ys]
    colors = ["black", "#c02020", "#2040c0", "#108030", "#905090"]
    pad = 40.0
    x0, x1 = float(x.min()), float(x.max())
    y0 = min(float(y.min()) for y in ys)
    y1 = max(float(y.max()) for y in ys)
    y0, y1 = y0 - 0.05 * (y1 - y0 + 1e-12), y1 + 0.05 * (y1 - y0 + 1e-12)

    def tx(v):
        return pad + (v - x0) / (x1 - x0 + 1e-300) * (width - 2 * pad)

    def ty(v):
        return height - pad - (v - y0) / (y1 - y0 + 1e-300) * (height - 2 * pad)

    lines = [f'<rect x="{pad}" y="{pad / 2}" width="{width - 2 * pad}" '
             f'height="{height - 1.5 * pad}" fill="none" stroke="#888"/>\n']
    for i, (y, lab) in enumerate(zip(ys, labels)):
        col = colors[i % len(colors)]
        path = " ".join(f"{tx(a):.2f},{ty(b):.2f}" for a, b in zip(x, y))
        lines.append(f'<polyline points="{path}" fill="none" stroke="{col}" '
                     f'stroke-width="1.4"/>\n')
        lines.append(f'<text x="{width - pad + 4:.1f}" y="{pad + 14 * i:.1f}" '
                     f'font-size="11" fill="{col}" font-family="monospace">'
                     f'{lab}</text>\n')
    for v, label in ((x0, f"{x0:g}"), (x1, f"{x1:g}")):
        lines.append(f'<text x="{tx(v):.1f}" y="{height - pad / 2:.1f}" '
                     f'font-size="11" text-anchor="middle" '
                     f'font-family="monospace">{label}</text>\n')
    for v in (y0, y1):
        lines.append(f'<text x="{pad - 4:.1f}" y="{ty(v):.1f}" font-size="11" '
                     f'text-anchor="end" font-family="monospace">{v:.3g}</text>\n')
    return _frame(lines, width, height, title)
