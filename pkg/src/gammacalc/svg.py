"""Minimal static SVG line charts (log-log), no plotting dependency.

The report charts are simple enough that emitting the vector markup directly
keeps the artifact reproducible and diffable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_PANEL_W, _PANEL_H = 320, 240
_MARGIN = 42


@dataclass(frozen=True)
class Series:
    label: str
    xs: tuple[float, ...]
    ys: tuple[float, ...]


@dataclass(frozen=True)
class Panel:
    title: str
    series: tuple[Series, ...]


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _log_ticks(lo: float, hi: float):
    first = math.ceil(math.log10(lo))
    last = math.floor(math.log10(hi))
    return [10.0 ** e for e in range(first, last + 1)]


def _panel_svg(panel: Panel, x0: int, y0: int) -> list[str]:
    pts = [
        (x, y)
        for s in panel.series
        for x, y in zip(s.xs, s.ys)
        if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)
    ]
    out = [f'<g transform="translate({x0},{y0})">']
    out.append(
        f'<text x="{_PANEL_W / 2}" y="14" text-anchor="middle" font-size="11" '
        f'font-family="monospace">{_esc(panel.title)}</text>'
    )
    iw, ih = _PANEL_W - 2 * _MARGIN, _PANEL_H - 2 * _MARGIN
    out.append(
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{iw}" height="{ih}" '
        f'fill="none" stroke="#999"/>'
    )
    if pts:
        lx = [math.log10(p[0]) for p in pts]
        ly = [math.log10(p[1]) for p in pts]
        xmin, xmax = min(lx), max(lx)
        ymin, ymax = min(ly), max(ly)
        if xmax - xmin < 1e-9:
            xmax = xmin + 1.0
        if ymax - ymin < 1e-9:
            ymax = ymin + 1.0

        def sx(v):
            return _MARGIN + (math.log10(v) - xmin) / (xmax - xmin) * iw

        def sy(v):
            return _PANEL_H - _MARGIN - (math.log10(v) - ymin) / (ymax - ymin) * ih

        for tick in _log_ticks(10 ** xmin, 10 ** xmax):
            out.append(
                f'<line x1="{sx(tick):.1f}" y1="{_PANEL_H - _MARGIN}" '
                f'x2="{sx(tick):.1f}" y2="{_PANEL_H - _MARGIN + 4}" stroke="#333"/>'
            )
            out.append(
                f'<text x="{sx(tick):.1f}" y="{_PANEL_H - _MARGIN + 15}" text-anchor="middle" '
                f'font-size="9" font-family="monospace">1e{int(math.log10(tick))}</text>'
            )
        for tick in _log_ticks(10 ** ymin, 10 ** ymax):
            out.append(
                f'<line x1="{_MARGIN - 4}" y1="{sy(tick):.1f}" x2="{_MARGIN}" '
                f'y2="{sy(tick):.1f}" stroke="#333"/>'
            )
            out.append(
                f'<text x="{_MARGIN - 6}" y="{sy(tick):.1f}" text-anchor="end" '
                f'font-size="9" font-family="monospace">1e{int(math.log10(tick))}</text>'
            )
        for i, s in enumerate(panel.series):
            color = _COLORS[i % len(_COLORS)]
            path = " ".join(
                f"{'M' if k == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}"
                for k, (x, y) in enumerate(zip(s.xs, s.ys))
                if x > 0 and y > 0
            )
            if path:
                out.append(f'<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            out.append(
                f'<text x="{_MARGIN + 6}" y="{_MARGIN + 13 + 11 * i}" font-size="9" '
                f'fill="{color}" font-family="monospace">{_esc(s.label)}</text>'
            )
    out.append("</g>")
    return out


def render_panels(panels: list[Panel], columns: int = 2) -> str:
    """A single well-formed SVG document holding a grid of log-log panels."""
    columns = max(1, columns)
    rows = (len(panels) + columns - 1) // columns if panels else 1
    width = columns * _PANEL_W
    height = max(rows, 1) * _PANEL_H
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for i, panel in enumerate(panels):
        parts.extend(_panel_svg(panel, (i % columns) * _PANEL_W, (i // columns) * _PANEL_H))
    parts.append("</svg>")
    return "\n".join(parts)
