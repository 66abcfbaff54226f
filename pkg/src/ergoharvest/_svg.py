"""Minimal deterministic SVG line plots (polylines + axes, no dependencies).

CSV is the canonical artifact; these plots are a convenience for eyeballing
curve shapes, so the emitter favors byte-stable output over styling: fixed
palette, fixed layout, %.6g coordinates.
"""
from __future__ import annotations

from typing import Optional, Sequence

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 64, 20, 28, 48


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot_svg(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
                  x_label: str, y_label: str,
                  title: Optional[str] = None) -> str:
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    x_pad = 0.05 * (x_hi - x_lo or 1.0)
    y_pad = 0.05 * (y_hi - y_lo or 1.0)
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def px(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_W // 2}" y="18" text-anchor="middle" '
                   f'font-family="monospace" font-size="13">{title}</text>')
    axis = (f'M {_fmt(_ML)} {_fmt(_MT)} L {_fmt(_ML)} {_fmt(_H - _MB)} '
            f'L {_fmt(_W - _MR)} {_fmt(_H - _MB)}')
    out.append(f'<path d="{axis}" stroke="black" fill="none" stroke-width="1"/>')
    for t in _ticks(x_lo, x_hi):
        x = px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{_fmt(_H - _MB)}" '
                   f'x2="{_fmt(x)}" y2="{_fmt(_H - _MB + 5)}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_fmt(_H - _MB + 18)}" '
                   f'text-anchor="middle" font-family="monospace" '
                   f'font-size="11">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        out.append(f'<line x1="{_fmt(_ML - 5)}" y1="{_fmt(y)}" '
                   f'x2="{_fmt(_ML)}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{_fmt(_ML - 8)}" y="{_fmt(y + 4)}" '
                   f'text-anchor="end" font-family="monospace" '
                   f'font-size="11">{_fmt(t)}</text>')
    out.append(f'<text x="{_fmt((_ML + _W - _MR) / 2)}" y="{_fmt(_H - 10)}" '
               f'text-anchor="middle" font-family="monospace" '
               f'font-size="12">{x_label}</text>')
    out.append(f'<text x="16" y="{_fmt((_MT + _H - _MB) / 2)}" '
               f'text-anchor="middle" font-family="monospace" font-size="12" '
               f'transform="rotate(-90 16 {_fmt((_MT + _H - _MB) / 2)})">'
               f'{y_label}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{pts}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 14 + 14 * k
        out.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" '
                   f'x2="{_W - _MR - 100}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        out.append(f'<text x="{_W - _MR - 94}" y="{ly}" '
                   f'font-family="monospace" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
