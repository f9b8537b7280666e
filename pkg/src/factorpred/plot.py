"""A tiny deterministic SVG line chart: one polyline per series, shared axes.

Only what the risk-versus-parameter figures need. Coordinates are rounded
to two decimals so the output is byte-stable.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#7f7f7f")

W, H = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 55


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.1e}"
    return f"{v:g}"


def line_chart(series: dict, title: str = "", x_label: str = "", y_label: str = "",
               log_x: bool = False, log_y: bool = False, note: Optional[str] = None) -> str:
    """``series`` maps a name to a list of (x, y) points; non-finite y are skipped."""
    pts = {name: [(x, y) for x, y in xy if math.isfinite(y) and (not log_y or y > 0)]
           for name, xy in series.items()}
    xs = [x for v in pts.values() for x, _ in v]
    ys = [y for v in pts.values() for _, y in v]
    if not xs:
        raise ValueError("nothing to plot")
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    ty = (lambda v: math.log10(v)) if log_y else (lambda v: v)
    x0, x1 = min(map(tx, xs)), max(map(tx, xs))
    y0, y1 = min(map(ty, ys)), max(map(ty, ys))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(v):
        return LEFT + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (ty(v) - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">']
    if note:
        out.append(f"<!-- {escape(note)} -->")
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="black"/>')
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')

    def axis_values(lo, hi, log):
        if not log:
            return [(v, v) for v in _ticks(lo, hi)]
        return [(10 ** e, 10 ** e) for e in range(math.ceil(lo), math.floor(hi) + 1)] or \
            [(10 ** lo, 10 ** lo)]

    for v, lab in axis_values(x0, x1, log_x):
        x = px(v)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">'
                   f'{_fmt(lab)}</text>')
    for v, lab in axis_values(y0, y1, log_y):
        y = py(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(lab)}</text>')
    if x_label:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H - 15}" text-anchor="middle">'
                   f'{escape(x_label)}</text>')
    if y_label:
        out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {TOP + ph / 2:.2f})">{escape(y_label)}</text>')

    for i, (name, xy) in enumerate(pts.items()):
        color = PALETTE[i % len(PALETTE)]
        xy = sorted(xy)
        if xy:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in xy)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                       f'points="{path}"/>')
            for x, y in xy:
                out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>')
        ly = TOP + 10 + 18 * i
        out.append(f'<line x1="{W - RIGHT + 12}" y1="{ly}" x2="{W - RIGHT + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 38}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def risk_chart(summary: Sequence[dict], x_of: dict, x_label: str, log_x: bool = False,
               log_y: bool = True, title: str = "", note: Optional[str] = None) -> str:
    """Median excess risk per method against the design parameter ``x_of[design]``."""
    series: dict = {}
    for row in summary:
        if row["design"] in x_of:
            series.setdefault(row["method"], []).append((x_of[row["design"]], row["median"]))
    return line_chart(series, title, x_label, "median excess risk", log_x, log_y, note)
