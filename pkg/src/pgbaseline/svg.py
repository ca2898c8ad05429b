"""Minimal standalone SVG line charts with optional ±1 std bands.

Output depends only on the input numbers: coordinates are printed with a
fixed number of decimals and series keep their input order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .csvio import SchemaError, read_table
from .experiments import CURVE_HEADER, SWEEP_HEADER, aggregate_stats, read_curves_csv

WIDTH, HEIGHT = 640, 400
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    std: np.ndarray | None = None


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render(series, title="", xlabel="", ylabel=""):
    """Render ``series`` (a list of :class:`Series`) as an SVG document."""
    series = [s for s in series if len(s.x)]
    if not series:
        raise ValueError("nothing to plot: no data points")
    xs = np.concatenate([s.x for s in series])
    lows = np.concatenate([s.y - (s.std if s.std is not None else 0) for s in series])
    highs = np.concatenate([s.y + (s.std if s.std is not None else 0) for s in series])
    finite = np.isfinite(lows) & np.isfinite(highs)
    if not finite.any():
        raise ValueError("nothing to plot: no finite values")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(lows[finite].min()), float(highs[finite].max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    def pts(x, y):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y)
                        if math.isfinite(a) and math.isfinite(b))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
           f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
           f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>']
    for v in _ticks(x0, x1):
        out.append(f'<text x="{px(v):.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="11">{v:.4g}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<text x="{MARGIN - 6}" y="{py(v) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{v:.4g}</text>')
    out.append(f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 16}" text-anchor="middle" '
               f'font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2:.0f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {HEIGHT / 2:.0f})">{escape(ylabel)}</text>')

    for i, s in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        if s.std is not None:
            upper = pts(s.x, s.y + s.std)
            lower = pts(s.x[::-1], (s.y - s.std)[::-1])
            out.append(f'<polygon class="band" points="{upper} {lower}" fill="{colour}" '
                       'fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline points="{pts(s.x, s.y)}" fill="none" stroke="{colour}" '
                   f'stroke-width="1.5"><title>{escape(s.label)}</title></polyline>')
        ly = MARGIN + 14 * i
        out.append(f'<text x="{WIDTH - MARGIN + 4}" y="{ly}" font-size="10" fill="{colour}">'
                   f'{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _sweep_series(rows):
    groups = {}
    numeric = all(r[2] not in ("none", "adaptive") for r in rows)
    for algo, gamma, baseline, steps, _, mean, std in rows:
        if numeric:
            key, x = f"{algo} gamma={gamma}", float(baseline)
        else:
            key, x = f"{algo} gamma={gamma}", math.log10(int(steps))
        groups.setdefault(key, []).append((x, float(mean), float(std)))
    series = []
    for key, pts in groups.items():
        a = np.array(sorted(pts))
        series.append(Series(key, a[:, 0], a[:, 1], a[:, 2]))
    labels = ("b / average reward", "relative error") if numeric else ("log10 t", "relative error")
    return series, labels


def _curve_series(path):
    by_algo = {}
    for c in read_curves_csv(path):
        by_algo.setdefault(c.algorithm, []).append(c)
    series = []
    for algo, curves in by_algo.items():
        ok = [c for c in curves if not c.diverged]
        if len(ok) >= 2:
            steps, mean, std = aggregate_stats(ok)
            series.append(Series(f"{algo} (n={len(ok)})", steps.astype(float), mean, std))
        elif ok:
            series.append(Series(f"{algo} (n=1)", ok[0].steps.astype(float), ok[0].rewards))
    return series, ("step", "average reward")


def plot_csv(csv_path, svg_path=None, title=None):
    """Chart a sweep, bias-variance or training CSV written by this package."""
    comment, header, rows = read_table(csv_path)
    if not rows:
        raise SchemaError(f"{csv_path}: no data rows")
    if header == SWEEP_HEADER:
        series, (xl, yl) = _sweep_series(rows)
    elif header == CURVE_HEADER:
        series, (xl, yl) = _curve_series(csv_path)
    else:
        raise SchemaError(f"{csv_path}: unrecognised columns {header}")
    text = render(series, title if title is not None else comment.split(";")[0], xl, yl)
    if svg_path is not None:
        with open(svg_path, "w", newline="") as fh:
            fh.write(text)
    return text
