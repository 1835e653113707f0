"""Minimal SVG line charts for sweep CSVs.

The SVG is written by hand so every data point maps to a polyline vertex by
a plain affine (or log-affine) transform, which keeps the output easy to
check and free of plotting dependencies.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .experiments import CSV_HEADER

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 70, "right": 130, "top": 30, "bottom": 50}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

# metric column -> (axis label, log-scale y)
METRICS = {"aer_mean": ("AER", False), "nmse_paper": ("NMSE", True)}


class PlotError(ValueError):
    pass


def read_sweep_csv(path) -> list:
    """Parse a sweep CSV. Raises PlotError naming the offending row."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise PlotError(f"{path}: empty file")
    if lines[0].strip() != CSV_HEADER:
        raise PlotError(f"{path}: row 1: unexpected header {lines[0]!r}")
    cols = CSV_HEADER.split(",")
    rows = []
    for rowno, rec in enumerate(csv.reader(lines[1:]), start=2):
        if not rec:
            continue
        if len(rec) != len(cols):
            raise PlotError(f"{path}: row {rowno}: expected {len(cols)} fields, got {len(rec)}")
        row = dict(zip(cols, rec))
        try:
            row["sweep_val"] = float(row["sweep_val"])
            for c in ("aer_mean", "miss_rate", "fa_rate", "nmse_paper", "nmse_std"):
                row[c] = float(row[c])
            row["trials"] = int(row["trials"])
            row["failures"] = int(row["failures"])
            row["time_mean_s"] = float(row["time_mean_s"]) if row["time_mean_s"] else math.nan
        except ValueError as exc:
            raise PlotError(f"{path}: row {rowno}: {exc}") from exc
        rows.append(row)
    if not rows:
        raise PlotError(f"{path}: no data rows")
    return rows


class Axes:
    """Data-to-pixel transform for one chart."""

    def __init__(self, xs, ys, log_y=False):
        self.log_y = log_y
        self.x0, self.x1 = _span(xs)
        ty = [math.log10(y) for y in ys] if log_y else list(ys)
        self.y0, self.y1 = _span(ty)
        self.px0, self.px1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.py0, self.py1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def x(self, v):
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v):
        t = math.log10(v) if self.log_y else v
        return self.py0 + (t - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)


def _span(vals):
    lo, hi = min(vals), max(vals)
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _usable(v, log_y):
    return math.isfinite(v) and (v > 0 or not log_y)


def line_chart(series: dict, xlabel: str, ylabel: str, log_y: bool = False, title: str = "") -> str:
    """SVG text with one polyline per entry of ``series`` (name -> [(x, y), ...])."""
    pts = {k: [(x, y) for x, y in v if _usable(y, log_y)] for k, v in series.items()}
    allpts = [p for v in pts.values() for p in v]
    if not allpts:
        raise PlotError(f"nothing to plot for {ylabel}")
    ax = Axes([p[0] for p in allpts], [p[1] for p in allpts], log_y)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{ax.px0}" y="{ax.py1}" width="{ax.px1 - ax.px0}" height="{ax.py0 - ax.py1}" '
           'fill="none" stroke="black"/>']
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>')
    for v in sorted({p[0] for p in allpts}):
        out.append(f'<text x="{ax.x(v):.2f}" y="{ax.py0 + 18}" text-anchor="middle" '
                   f'font-size="11">{v:g}</text>')
    for t in _yticks(ax):
        yv = 10 ** t if log_y else t
        out.append(f'<line x1="{ax.px0 - 4}" x2="{ax.px0}" y1="{ax.y(yv):.2f}" y2="{ax.y(yv):.2f}" '
                   'stroke="black"/>')
        out.append(f'<text x="{ax.px0 - 6}" y="{ax.y(yv) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{yv:.3g}</text>')
    out.append(f'<text x="{(ax.px0 + ax.px1) / 2}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">{xlabel}</text>')
    out.append(f'<text x="16" y="{(ax.py0 + ax.py1) / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {(ax.py0 + ax.py1) / 2})">{ylabel}'
               f'{" (log)" if log_y else ""}</text>')
    for i, (name, p) in enumerate(pts.items()):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{ax.x(x):.4f},{ax.y(y):.4f}" for x, y in sorted(p))
        out.append(f'<polyline data-series="{name}" fill="none" stroke="{color}" '
                   f'stroke-width="2" points="{coords}"/>')
        ly = MARGIN["top"] + 20 * i + 10
        out.append(f'<line x1="{ax.px1 + 10}" x2="{ax.px1 + 30}" y1="{ly}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ax.px1 + 36}" y="{ly + 4}" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _yticks(ax, n=5):
    if ax.log_y:
        lo, hi = math.floor(ax.y0), math.ceil(ax.y1)
        ticks = [t for t in range(lo, hi + 1) if ax.y0 <= t <= ax.y1]
        if len(ticks) >= 2:
            return ticks
    return [ax.y0 + k * (ax.y1 - ax.y0) / (n - 1) for k in range(n)]


def emit_plots(csv_path, out_dir) -> list:
    """One SVG per (swept variable, metric). Returns the written paths."""
    rows = read_sweep_csv(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for var in dict.fromkeys(r["sweep_var"] for r in rows):
        sub = [r for r in rows if r["sweep_var"] == var]
        for col, (label, log_y) in METRICS.items():
            series = {}
            for r in sub:
                series.setdefault(r["solver"], []).append((r["sweep_val"], r[col]))
            try:
                svg = line_chart(series, var, label, log_y, f"{label} vs {var}")
            except PlotError:
                continue
            path = out_dir / f"{col.split('_')[0]}_vs_{var}.svg"
            path.write_text(svg)
            written.append(path)
    if not written:
        raise PlotError(f"{csv_path}: no plottable values")
    return written
