"""Training-curve plots: CSV in, standalone SVG line charts out.

One chart per metric; one series per variant, averaged over seeds with a
min/max band. Curve files follow the training loop's naming,
``curves_{variant}_{object}_seed{seed}.csv``; anything before the last
``_seed`` token is treated as the series name.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .errors import ParseError
from .policy.train import CURVE_HEADER

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 28, 46


def read_curve_csv(path):
    """Rows of the documented curve schema; ParseError on anything else."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty curve file", 1, path) from None
        if tuple(header) != CURVE_HEADER:
            raise ParseError(
                f"unexpected header {header!r}, want {list(CURVE_HEADER)}", 1, path
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CURVE_HEADER):
                raise ParseError("wrong column count", lineno, path)
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise ParseError(f"bad numeric value in {row!r}", lineno, path) from None
    if not rows:
        raise ParseError("no data rows", 2, path)
    return np.asarray(rows)


def series_name(path) -> str:
    stem = Path(path).stem
    stem = re.sub(r"^curves_", "", stem)
    return re.sub(r"_seed\d+$", "", stem)


def _axis_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def _svg_line_chart(title, xlabel, ylabel, series, path):
    """series: list of (name, x, mean, lo, hi) arrays."""
    xs = np.concatenate([s[1] for s in series])
    ys = np.concatenate([np.concatenate([s[3], s[4]]) for s in series])
    ys = ys[np.isfinite(ys)]
    if len(ys) == 0:
        ys = np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(max(xs.max(), xs.min() + 1e-9))
    y0, y1 = float(ys.min()), float(ys.max())
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return _ML + (x - x0) / (x1 - x0) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y0) / (y1 - y0) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tx in _axis_ticks(x0, x1):
        parts.append(
            f'<line x1="{px(tx):.1f}" y1="{_H - _MB}" x2="{px(tx):.1f}" '
            f'y2="{_H - _MB + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px(tx):.1f}" y="{_H - _MB + 18}" text-anchor="middle">{tx:g}</text>'
        )
    for ty in _axis_ticks(y0, y1):
        parts.append(
            f'<line x1="{_ML - 4}" y1="{py(ty):.1f}" x2="{_ML}" y2="{py(ty):.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{py(ty) + 4:.1f}" text-anchor="end">{ty:.3g}</text>'
        )
    parts.append(
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>'
    )
    parts.append(
        f'<text x="{_W / 2:.1f}" y="{_H - 10}" text-anchor="middle">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_H / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H / 2:.1f})">{ylabel}</text>'
    )
    for k, (name, x, mean, lo, hi) in enumerate(series):
        color = _PALETTE[k % len(_PALETTE)]
        ok = np.isfinite(mean)
        if not ok.any():
            continue
        band_ok = ok & np.isfinite(lo) & np.isfinite(hi)
        if band_ok.any():
            fwd = [f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[band_ok], hi[band_ok])]
            back = [f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[band_ok][::-1], lo[band_ok][::-1])]
            parts.append(
                f'<polygon points="{" ".join(fwd + back)}" fill="{color}" '
                f'fill-opacity="0.15" stroke="none"/>'
            )
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x[ok], mean[ok]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 14 + 16 * k
        parts.append(
            f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" x2="{_W - _MR - 96}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{_W - _MR - 90}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


def emit_plots(curve_paths, out_dir):
    """One SVG per metric column, grouping seed files into variant bands."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict = {}
    for path in curve_paths:
        groups.setdefault(series_name(path), []).append(read_curve_csv(path))
    written = []
    for col, metric in enumerate(CURVE_HEADER[1:], start=1):
        series = []
        for name in sorted(groups):
            runs = groups[name]
            n = min(len(r) for r in runs)
            x = runs[0][:n, 0]
            stack = np.stack([r[:n, col] for r in runs])
            with np.errstate(invalid="ignore"):
                series.append(
                    (name, x, np.nanmean(stack, axis=0),
                     np.nanmin(stack, axis=0), np.nanmax(stack, axis=0))
                )
        path = out_dir / f"curve_{metric}.svg"
        _svg_line_chart(metric, CURVE_HEADER[0], metric, series, path)
        written.append(path)
    return written
