"""Minimal self-contained SVG charts: polylines, shaded bands and bars.

Output is plain XML with inline styles only, so files diff cleanly and
render without fetching anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

__all__ = ["Series", "Band", "line_chart", "band_chart", "bar_chart"]

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 150, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]


@dataclass
class Band:
    label: str
    x: Sequence[float]
    mean: Sequence[float]
    lower: Sequence[float]
    upper: Sequence[float]


@dataclass
class _Axes:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    log_y: bool

    def _ty(self, y):
        if self.log_y:
            return math.log10(y)
        return y

    def px(self, x):
        span = self.x_hi - self.x_lo or 1.0
        return MARGIN_LEFT + (x - self.x_lo) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def py(self, y):
        lo, hi = self._ty(self.y_lo), self._ty(self.y_hi)
        span = hi - lo or 1.0
        return HEIGHT - MARGIN_BOTTOM - (self._ty(y) - lo) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.3g}"


def _finite(values, log_y):
    return [v for v in values if math.isfinite(v) and (v > 0 or not log_y)]


def _make_axes(xs, ys, log_y) -> _Axes:
    xs = [x for x in xs if math.isfinite(x)]
    ys = _finite(ys, log_y)
    if not xs:
        xs = [0.0, 1.0]
    if not ys:
        ys = [1.0] if log_y else [0.0, 1.0]
    y_lo, y_hi = min(ys), max(ys)
    if y_lo == y_hi:
        y_lo, y_hi = (y_lo / 2, y_hi * 2) if log_y else (y_lo - 1, y_hi + 1)
    return _Axes(min(xs), max(xs), y_lo, y_hi, log_y)


def _frame(ax: _Axes, title: str, x_label: str, y_label: str, x_ticks: bool = True) -> list[str]:
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    out = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(x_label)}</text>',
        f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(y_label)}</text>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for k in range(5 if x_ticks else 0):
        xv = ax.x_lo + (ax.x_hi - ax.x_lo) * k / 4
        out.append(f'<text x="{_fmt(ax.px(xv))}" y="{y0 + 16}" text-anchor="middle" font-size="10">{_tick_label(xv)}</text>')
    if ax.log_y:
        lo, hi = math.floor(math.log10(ax.y_lo)), math.ceil(math.log10(ax.y_hi))
        ticks = [10.0**e for e in range(lo, hi + 1) if ax.y_lo <= 10.0**e <= ax.y_hi] or [ax.y_lo, ax.y_hi]
    else:
        ticks = [ax.y_lo + (ax.y_hi - ax.y_lo) * k / 4 for k in range(5)]
    for yv in ticks:
        out.append(f'<text x="{x0 - 6}" y="{_fmt(ax.py(yv) + 3)}" text-anchor="end" font-size="10">{_tick_label(yv)}</text>')
    return out


def _legend(labels: Sequence[str]) -> list[str]:
    out = []
    x = WIDTH - MARGIN_RIGHT + 12
    for k, label in enumerate(labels):
        y = MARGIN_TOP + 16 * k + 8
        color = PALETTE[k % len(PALETTE)]
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x + 24}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    return out


def _document(parts: list[str]) -> str:
    body = "\n".join(parts)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n{body}\n</svg>\n'
    )


def _points(ax: _Axes, xs, ys) -> str:
    pts = []
    for x, y in zip(xs, ys):
        if not math.isfinite(x) or not math.isfinite(y) or (ax.log_y and y <= 0):
            continue
        pts.append(f"{_fmt(ax.px(x))},{_fmt(ax.py(y))}")
    return " ".join(pts)


def line_chart(series: Sequence[Series], title="", x_label="epoch", y_label="suboptimality", log_y=True) -> str:
    """Overlay polylines; non-positive values are dropped on a log axis."""
    ax = _make_axes([x for s in series for x in s.x], [y for s in series for y in s.y], log_y)
    parts = _frame(ax, title, x_label, y_label)
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{_points(ax, s.x, s.y)}"/>')
    parts += _legend([s.label for s in series])
    return _document(parts)


def band_chart(bands: Sequence[Band], title="", x_label="epoch", y_label="suboptimality", log_y=True) -> str:
    """Mean curves with shaded lower/upper envelopes."""
    ys = [v for b in bands for v in (*b.lower, *b.upper, *b.mean)]
    ax = _make_axes([x for b in bands for x in b.x], ys, log_y)
    parts = _frame(ax, title, x_label, y_label)
    for k, b in enumerate(bands):
        color = PALETTE[k % len(PALETTE)]
        if log_y:
            # a band reaching zero is clipped at the axis floor
            lower = [v if v > 0 else ax.y_lo for v in b.lower]
        else:
            lower = list(b.lower)
        outline = _points(ax, list(b.x) + list(reversed(b.x)), list(b.upper) + list(reversed(lower)))
        parts.append(f'<polygon fill="{color}" fill-opacity="0.2" stroke="none" points="{outline}"/>')
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{_points(ax, b.x, b.mean)}"/>')
    parts += _legend([b.label for b in bands])
    return _document(parts)


def bar_chart(labels: Sequence[str], values: Sequence[float], title="", y_label="queries", marks=None) -> str:
    """Vertical bars; ``marks[k]`` (e.g. "cap") is printed above bar k.

    Non-finite values draw a full-height dashed outline.
    """
    finite = [v for v in values if math.isfinite(v)]
    top = max(finite) if finite else 1.0
    top = top if top > 0 else 1.0
    ax = _Axes(0.0, float(len(labels)), 0.0, top * 1.1, False)
    parts = _frame(ax, title, "", y_label, x_ticks=False)
    slot = (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / max(len(labels), 1)
    base = ax.py(0.0)
    for k, (label, v) in enumerate(zip(labels, values)):
        x = MARGIN_LEFT + k * slot + slot * 0.15
        w = slot * 0.7
        if math.isfinite(v):
            y = ax.py(v)
            parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(base - y)}" fill="{PALETTE[0]}"/>')
        else:
            y = ax.py(ax.y_hi)
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" height="{_fmt(base - y)}" '
                f'fill="none" stroke="{PALETTE[1]}" stroke-dasharray="4 2"/>'
            )
        parts.append(f'<text x="{_fmt(x + w / 2)}" y="{_fmt(base + 14)}" text-anchor="middle" font-size="10">{escape(label)}</text>')
        if marks and marks[k]:
            parts.append(f'<text x="{_fmt(x + w / 2)}" y="{_fmt(y - 4)}" text-anchor="middle" font-size="10">{escape(marks[k])}</text>')
    return _document(parts)
