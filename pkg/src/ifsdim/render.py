"""Dependency-free SVG scatter plots of 2-D point clouds."""

from __future__ import annotations

import numpy as np


class UnsupportedDimension(ValueError):
    pass


def render_svg(points, width: int = 800, height: int = 800, margin: int = 48,
               radius: float = 0.35, title: str | None = None) -> str:
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        pts = pts.reshape(0, 2) if pts.ndim < 2 or pts.shape[-1] == 2 else pts
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise UnsupportedDimension(f"can only render 2-D clouds, got shape {pts.shape}")
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi > lo, hi - lo, 1.0)
    pw, ph = width - 2 * margin, height - 2 * margin
    sx = margin + (pts[:, 0] - lo[0]) / span[0] * pw
    sy = height - margin - (pts[:, 1] - lo[1]) / span[1] * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black" stroke-width="1"/>',
        '<g font-family="monospace" font-size="11" fill="black">',
        f'<text x="{margin}" y="{height - margin + 16}">{lo[0]:.6g}</text>',
        f'<text x="{width - margin}" y="{height - margin + 16}" text-anchor="end">{hi[0]:.6g}</text>',
        f'<text x="{margin - 4}" y="{height - margin}" text-anchor="end">{lo[1]:.6g}</text>',
        f'<text x="{margin - 4}" y="{margin + 10}" text-anchor="end">{hi[1]:.6g}</text>',
    ]
    if title:
        out.append(f'<text x="{width / 2:g}" y="{margin - 16}" text-anchor="middle">{title}</text>')
    out.append("</g>")
    out.append('<g fill="black" stroke="none">')
    out.extend(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius}"/>' for x, y in zip(sx, sy))
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
