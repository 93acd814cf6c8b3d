"""Minimal SVG line plots; every figure's data is also written as CSV by the caller."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f4e9c", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d")


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    color: Optional[str] = None
    marker: str = "none"  # "none", "circle", "cross"
    dashed: bool = False


@dataclass
class Panel:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: List[Series] = field(default_factory=list)
    equal_aspect: bool = False


def _ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt(v: float) -> str:
    return ("%.4g" % v).replace("e-0", "e-").replace("e+0", "e")


def _panel_svg(panel: Panel, x0: float, y0: float, w: float, h: float, index: int) -> List[str]:
    xs = np.concatenate([np.asarray(s.x, float) for s in panel.series])
    ys = np.concatenate([np.asarray(s.y, float) for s in panel.series])
    good = np.isfinite(xs) & np.isfinite(ys)
    xlo, xhi = float(xs[good].min()), float(xs[good].max())
    ylo, yhi = float(ys[good].min()), float(ys[good].max())
    if panel.equal_aspect:
        half = 0.5 * max(xhi - xlo, yhi - ylo)
        cx, cy = 0.5 * (xlo + xhi), 0.5 * (ylo + yhi)
        xlo, xhi, ylo, yhi = cx - half, cx + half, cy - half, cy + half
    padx = 0.05 * (xhi - xlo or 1.0)
    pady = 0.05 * (yhi - ylo or 1.0)
    xlo, xhi, ylo, yhi = xlo - padx, xhi + padx, ylo - pady, yhi + pady
    L, R, T, B = 60, 15, 30, 45
    pw, ph = w - L - R, h - T - B

    def px(v):
        return x0 + L + (v - xlo) / (xhi - xlo) * pw

    def py(v):
        return y0 + T + (yhi - v) / (yhi - ylo) * ph

    out = [f'<rect x="{x0 + L:.2f}" y="{y0 + T:.2f}" width="{pw:.2f}" height="{ph:.2f}" '
           'fill="none" stroke="#333" stroke-width="1"/>']
    for t in _ticks(xlo, xhi):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{y0 + T + ph:.2f}" x2="{X:.2f}" y2="{y0 + T + ph + 4:.2f}" stroke="#333"/>')
        out.append(f'<text x="{X:.2f}" y="{y0 + T + ph + 16:.2f}" font-size="10" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        Y = py(t)
        out.append(f'<line x1="{x0 + L - 4:.2f}" y1="{Y:.2f}" x2="{x0 + L:.2f}" y2="{Y:.2f}" stroke="#333"/>')
        out.append(f'<text x="{x0 + L - 6:.2f}" y="{Y + 3:.2f}" font-size="10" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{x0 + L + pw / 2:.2f}" y="{y0 + 18:.2f}" font-size="12" text-anchor="middle">'
               f'{escape(panel.title)}</text>')
    out.append(f'<text x="{x0 + L + pw / 2:.2f}" y="{y0 + h - 8:.2f}" font-size="11" text-anchor="middle">'
               f'{escape(panel.xlabel)}</text>')
    out.append(f'<text x="{x0 + 14:.2f}" y="{y0 + T + ph / 2:.2f}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 {x0 + 14:.2f} {y0 + T + ph / 2:.2f})">{escape(panel.ylabel)}</text>')
    clip = f"clip{index}"
    out.append(f'<clipPath id="{clip}"><rect x="{x0 + L:.2f}" y="{y0 + T:.2f}" width="{pw:.2f}" height="{ph:.2f}"/></clipPath>')
    legend_y = y0 + T + 14
    for k, s in enumerate(panel.series):
        color = s.color or PALETTE[k % len(PALETTE)]
        x = np.asarray(s.x, float)
        y = np.asarray(s.y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        if s.marker == "none":
            dash = ' stroke-dasharray="5,3"' if s.dashed else ""
            out.append(f'<polyline clip-path="url(#{clip})" points="{pts}" fill="none" stroke="{color}" '
                       f'stroke-width="1.3"{dash}/>')
        else:
            for a, b in zip(x[ok], y[ok]):
                X, Y = px(a), py(b)
                if s.marker == "circle":
                    out.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="3" fill="none" stroke="{color}"/>')
                else:
                    out.append(f'<path d="M{X - 5:.2f},{Y - 5:.2f}L{X + 5:.2f},{Y + 5:.2f}M{X - 5:.2f},{Y + 5:.2f}'
                               f'L{X + 5:.2f},{Y - 5:.2f}" stroke="{color}" stroke-width="2"/>')
        if s.label:
            out.append(f'<text x="{x0 + L + pw - 8:.2f}" y="{legend_y:.2f}" font-size="10" text-anchor="end" '
                       f'fill="{color}">{escape(s.label)}</text>')
            legend_y += 13
    return out


def write_svg(panels: Sequence[Panel], path, width: float = 460, height: float = 360) -> str:
    path = os.fspath(path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    total_w = width * len(panels)
    body = ['<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w:.0f}" height="{height:.0f}" '
            f'viewBox="0 0 {total_w:.0f} {height:.0f}" font-family="sans-serif">',
            f'<rect width="{total_w:.0f}" height="{height:.0f}" fill="white"/>']
    for i, panel in enumerate(panels):
        body.extend(_panel_svg(panel, i * width, 0, width, height, i))
    body.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(body) + "\n")
    return path
