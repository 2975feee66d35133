"""Latent scatter plots as plain SVG 1.1, coloured by Camelot key."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .metrics import camelot_order

WIDTH, HEIGHT = 640, 480
PLOT = (40, 40, 460, 440)  # left, top, right, bottom
LEGEND_X = 490


@lru_cache(maxsize=None)
def palette() -> dict[int, str]:
    """Camelot number -> colour; minor and major keys of one number share a hue."""
    text = resources.files("tonalvae.data").joinpath("camelot_palette.json").read_text(encoding="utf-8")
    return {int(k): v for k, v in json.loads(text).items()}


def key_colour(key) -> str:
    return palette()[key.camelot[0]]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _star(cx: float, cy: float, r: float = 9.0) -> str:
    pts = []
    for i in range(10):
        rad = r if i % 2 == 0 else r * 0.45
        a = -np.pi / 2 + i * np.pi / 5
        pts.append(f"{_fmt(cx + rad * np.cos(a))},{_fmt(cy + rad * np.sin(a))}")
    return " ".join(pts)


def _scale(xy: np.ndarray):
    left, top, right, bottom = PLOT
    if xy.size == 0:
        return xy
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1])) or 1.0
    mid = (lo + hi) / 2
    size = min(right - left, bottom - top)
    cx, cy = (left + right) / 2, (top + bottom) / 2
    out = np.empty_like(xy)
    out[:, 0] = cx + (xy[:, 0] - mid[0]) / span * size * 0.9
    out[:, 1] = cy - (xy[:, 1] - mid[1]) / span * size * 0.9  # SVG y grows downwards
    return out


def svg_scatter(points, title: str = "", mode: str | None = None) -> str:
    """SVG text for projected latent points; centroids are drawn as stars."""
    points = [p for p in points]
    if any(p.xy is None for p in points):
        raise ValueError("points need a 2-D projection; run pca2 first")
    if mode is None:
        mode = points[0].key.mode if points else "major"
    keys = [p.key for p in points]
    xy = np.array([p.xy for p in points], dtype=float).reshape(-1, 2)
    order = {k: i for i, k in enumerate(camelot_order(mode))}
    present = sorted(set(keys), key=lambda k: (order.get(k, 99), k))
    cents = {k: xy[[i for i, q in enumerate(keys) if q == k]].mean(axis=0) for k in present}
    canvas = _scale(np.concatenate([xy, np.array([cents[k] for k in present]).reshape(-1, 2)]))
    pts, stars = canvas[:len(points)], canvas[len(points):]

    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<rect x="{PLOT[0]}" y="{PLOT[1]}" width="{PLOT[2] - PLOT[0]}" height="{PLOT[3] - PLOT[1]}" '
        'fill="none" stroke="#999999" stroke-width="1"/>',
    ]
    if title:
        lines.append(f'<text x="{PLOT[0]}" y="25" font-family="sans-serif" font-size="14">{escape(title)}</text>')
    lines.append('<g id="points">')
    for (x, y), k in zip(pts, keys):
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{key_colour(k)}" '
                     f'fill-opacity="0.7" class="k{k.camelot_label}"/>')
    lines.append("</g>")
    lines.append('<g id="centroids">')
    for (x, y), k in zip(stars, present):
        lines.append(f'<polygon points="{_star(x, y)}" fill="{key_colour(k)}" stroke="#000000" '
                     f'stroke-width="0.8" class="k{k.camelot_label}"/>')
    lines.append("</g>")
    # the legend always lists the full wheel for the mode, so empty plots still carry it
    lines.append('<g id="legend" font-family="sans-serif" font-size="12">')
    for i, k in enumerate(camelot_order(mode)):
        y = PLOT[1] + 10 + 30 * i
        lines.append(f'<circle cx="{LEGEND_X}" cy="{y}" r="6" fill="{key_colour(k)}"/>')
        lines.append(f'<text x="{LEGEND_X + 14}" y="{y + 4}">{k.camelot_label} {escape(k.name)}</text>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_scatter(points, path, title: str = "", mode: str | None = None) -> None:
    Path(path).write_text(svg_scatter(points, title, mode), encoding="utf-8", newline="\n")
