"""Tiny deterministic SVG chart writer (line/band, bar, scatter).

Hand-rolled on purpose: the report contract is byte-identical reruns, and
plotting libraries embed timestamps, versions, and float jitter.  Charts are
a convenience; the CSV/JSON tables are the real output.
"""

from __future__ import annotations

import math
from typing import Sequence

_WIDTH = 640
_HEIGHT = 400
_MARGIN = 52


def _fmt(value: float) -> str:
    return f"{value:.2f}"


class _Frame:
    """Maps data coordinates into the fixed SVG viewport."""

    def __init__(self, x_lo: float, x_hi: float, y_lo: float, y_hi: float):
        if not (math.isfinite(x_lo) and math.isfinite(x_hi)):
            x_lo, x_hi = 0.0, 1.0
        if not (math.isfinite(y_lo) and math.isfinite(y_hi)):
            y_lo, y_hi = 0.0, 1.0
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi

    def x(self, v: float) -> float:
        span = _WIDTH - 2 * _MARGIN
        return _MARGIN + (v - self.x_lo) / (self.x_hi - self.x_lo) * span

    def y(self, v: float) -> float:
        span = _HEIGHT - 2 * _MARGIN
        return _HEIGHT - _MARGIN - (v - self.y_lo) / (self.y_hi - self.y_lo) * span


def _header(title: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{_escape(title)}</text>',
    ]


def _axes(frame: _Frame, x_label: str, y_label: str) -> list[str]:
    parts = [
        f'<line x1="{_MARGIN}" y1="{_HEIGHT - _MARGIN}" x2="{_WIDTH - _MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
        f'y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
        f'<text x="{_WIDTH // 2}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{_escape(x_label)}</text>',
        f'<text x="16" y="{_HEIGHT // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_HEIGHT // 2})">{_escape(y_label)}</text>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = frame.x_lo + frac * (frame.x_hi - frame.x_lo)
        yv = frame.y_lo + frac * (frame.y_hi - frame.y_lo)
        parts.append(
            f'<text x="{_fmt(frame.x(xv))}" y="{_HEIGHT - _MARGIN + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">'
            f"{_fmt(xv)}</text>"
        )
        parts.append(
            f'<text x="{_MARGIN - 6}" y="{_fmt(frame.y(yv) + 3)}" '
            f'text-anchor="end" font-family="sans-serif" font-size="10">'
            f"{_fmt(yv)}</text>"
        )
    return parts


def _escape(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def _finite_bounds(values: Sequence[float]) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    return min(finite), max(finite)


def line_chart(
    path: str,
    x: Sequence[float],
    series: Sequence[tuple[str, Sequence[float]]],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    band: tuple[Sequence[float], Sequence[float]] | None = None,
) -> None:
    """One or more polylines over a shared x grid, optional shaded band."""
    all_y: list[float] = []
    for _, ys in series:
        all_y.extend(ys)
    if band is not None:
        all_y.extend(band[0])
        all_y.extend(band[1])
    x_lo, x_hi = _finite_bounds(x)
    y_lo, y_hi = _finite_bounds(all_y)
    frame = _Frame(x_lo, x_hi, y_lo, y_hi)
    parts = _header(title)
    if band is not None:
        low, high = band
        points = [f"{_fmt(frame.x(xi))},{_fmt(frame.y(hi))}" for xi, hi in zip(x, high)]
        points += [
            f"{_fmt(frame.x(xi))},{_fmt(frame.y(lo))}"
            for xi, lo in zip(reversed(list(x)), reversed(list(low)))
        ]
        parts.append(
            f'<polygon points="{" ".join(points)}" fill="#9ecae1" '
            f'fill-opacity="0.6" stroke="none"/>'
        )
    colors = ("#08519c", "#a63603", "#54278f", "#006d2c")
    for idx, (label, ys) in enumerate(series):
        points = " ".join(
            f"{_fmt(frame.x(xi))},{_fmt(frame.y(yi))}" for xi, yi in zip(x, ys)
        )
        color = colors[idx % len(colors)]
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN}" y="{_MARGIN + 14 * idx}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{color}">{_escape(label)}</text>'
        )
    parts.extend(_axes(frame, x_label, y_label))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")


def bar_chart(
    path: str,
    labels: Sequence[str],
    heights: Sequence[float],
    title: str = "",
    y_label: str = "",
) -> None:
    y_lo, y_hi = _finite_bounds(heights)
    y_lo = min(0.0, y_lo)
    frame = _Frame(0.0, float(max(len(labels), 1)), y_lo, y_hi)
    parts = _header(title)
    slot = (_WIDTH - 2 * _MARGIN) / max(len(labels), 1)
    for i, (label, height) in enumerate(zip(labels, heights)):
        x0 = _MARGIN + i * slot + 0.15 * slot
        top = frame.y(max(height, 0.0))
        bottom = frame.y(min(height, 0.0))
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(top)}" width="{_fmt(0.7 * slot)}" '
            f'height="{_fmt(bottom - top)}" fill="#3182bd"/>'
        )
        parts.append(
            f'<text x="{_fmt(x0 + 0.35 * slot)}" y="{_HEIGHT - _MARGIN + 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="9">'
            f"{_escape(str(label))}</text>"
        )
    parts.extend(
        [
            f'<line x1="{_MARGIN}" y1="{_fmt(frame.y(0.0))}" '
            f'x2="{_WIDTH - _MARGIN}" y2="{_fmt(frame.y(0.0))}" stroke="black"/>',
            f'<line x1="{_MARGIN}" y1="{_MARGIN}" x2="{_MARGIN}" '
            f'y2="{_HEIGHT - _MARGIN}" stroke="black"/>',
            f'<text x="16" y="{_HEIGHT // 2}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {_HEIGHT // 2})">{_escape(y_label)}</text>',
        ]
    )
    for frac in (0.0, 0.5, 1.0):
        yv = frame.y_lo + frac * (frame.y_hi - frame.y_lo)
        parts.append(
            f'<text x="{_MARGIN - 6}" y="{_fmt(frame.y(yv) + 3)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{_fmt(yv)}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")


def scatter_chart(
    path: str,
    x: Sequence[float],
    y: Sequence[float],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    fit_line: tuple[float, float] | None = None,
) -> None:
    """Scatter with an optional y = a + b x overlay."""
    x_lo, x_hi = _finite_bounds(x)
    y_lo, y_hi = _finite_bounds(y)
    frame = _Frame(x_lo, x_hi, y_lo, y_hi)
    parts = _header(title)
    for xi, yi in zip(x, y):
        if not (math.isfinite(xi) and math.isfinite(yi)):
            continue
        parts.append(
            f'<circle cx="{_fmt(frame.x(xi))}" cy="{_fmt(frame.y(yi))}" '
            f'r="3" fill="#08519c" fill-opacity="0.7"/>'
        )
    if fit_line is not None:
        a, b = fit_line
        parts.append(
            f'<line x1="{_fmt(frame.x(frame.x_lo))}" '
            f'y1="{_fmt(frame.y(a + b * frame.x_lo))}" '
            f'x2="{_fmt(frame.x(frame.x_hi))}" '
            f'y2="{_fmt(frame.y(a + b * frame.x_hi))}" '
            f'stroke="#a63603" stroke-width="1.5"/>'
        )
    parts.extend(_axes(frame, x_label, y_label))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(parts) + "\n")
