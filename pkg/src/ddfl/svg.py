"""Minimal dependency-free SVG line charts (axes, ticks, polylines, legend)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#9467bd", "#2ca02c", "#ff7f0e", "#8c564b")

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 55


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // 6)
        return [float(e) for e in range(a, b + 1, step)]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return list(np.arange(start, hi + 0.5 * step, step))


def _fmt(v: float, log: bool) -> str:
    if log:
        return f"1e{int(v)}"
    return f"{v:.3g}"


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
               title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = False, logy: bool = False, markers: bool = False) -> str:
    """Render ``[(label, xs, ys), ...]`` as an SVG document string.

    Non-finite points (and non-positive ones on log axes) are dropped and
    split the polyline.
    """
    prepared = []
    for label, xs, ys in series:
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            px = np.where(ok, np.log10(x) if logx else x, np.nan)
            py = np.where(ok, np.log10(y) if logy else y, np.nan)
        prepared.append((label, px, py))

    allx = np.concatenate([p[1] for p in prepared]) if prepared else np.array([])
    ally = np.concatenate([p[2] for p in prepared]) if prepared else np.array([])
    allx, ally = allx[np.isfinite(allx)], ally[np.isfinite(ally)]
    x0, x1 = (allx.min(), allx.max()) if allx.size else (0.0, 1.0)
    y0, y1 = (ally.min(), ally.max()) if ally.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw, ph = W - ML - MR, H - MT - MB

    def sx(v):
        return ML + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MT + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for v in _ticks(x0, x1, logx):
        if x0 <= v <= x1:
            X = sx(v)
            out.append(f'<line x1="{X:.2f}" y1="{MT + ph}" x2="{X:.2f}" y2="{MT + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{MT + ph + 18}" text-anchor="middle">{_fmt(v, logx)}</text>')
    for v in _ticks(y0, y1, logy):
        if y0 <= v <= y1:
            Y = sy(v)
            out.append(f'<line x1="{ML - 5}" y1="{Y:.2f}" x2="{ML}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<line x1="{ML}" y1="{Y:.2f}" x2="{ML + pw}" y2="{Y:.2f}" stroke="#ddd"/>')
            out.append(f'<text x="{ML - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(v, logy)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MT + ph / 2})">{escape(ylabel)}</text>')

    for i, (label, px, py) in enumerate(prepared):
        color = COLORS[i % len(COLORS)]
        seg: list[str] = []
        segments = []
        for a, b in zip(px, py):
            if np.isfinite(a) and np.isfinite(b):
                seg.append(f"{sx(a):.2f},{sy(b):.2f}")
            elif seg:
                segments.append(seg)
                seg = []
        if seg:
            segments.append(seg)
        for s in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(s)}"/>')
            if markers:
                for pt in s:
                    cx, cy = pt.split(",")
                    out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
        ly = MT + 14 + 16 * i
        out.append(f'<line x1="{ML + pw - 150}" y1="{ly}" x2="{ML + pw - 130}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + pw - 125}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
