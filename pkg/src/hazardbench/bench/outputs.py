"""Boxplot SVG and CSV summary table rendered from a report.

The SVG is written by hand: one box per (model, source) group in report
order, quartile box, min/max whiskers, a red median line and a red mean
triangle.  Each box carries its statistics as ``data-*`` attributes.
"""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from xml.sax.saxutils import escape, quoteattr

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 1200, 750           # 12 x 7.5
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 90, 30, 50, 150
TABLE_COLUMNS = ("dataset", "model", "source", "mean", "median", "q1", "q3", "min", "max",
                 "n_runs")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _axis_range(values):
    lo, hi = min(values), max(values)
    lo = math.floor(lo * 20) / 20
    hi = math.ceil(hi * 20) / 20
    if hi - lo < 0.1:
        mid = (hi + lo) / 2
        lo, hi = mid - 0.05, mid + 0.05
    return lo, hi


class _Scale:
    def __init__(self, lo, hi):
        self.lo, self.hi = lo, hi
        self.top, self.bottom = MARGIN_T, HEIGHT - MARGIN_B

    def __call__(self, v):
        return self.bottom - (v - self.lo) / (self.hi - self.lo) * (self.bottom - self.top)

    def inverse(self, y):
        return self.lo + (self.bottom - y) / (self.bottom - self.top) * (self.hi - self.lo)


def render_boxplot_svg(report, dataset: str) -> str | None:
    groups = [g for g in report.groups if g["dataset"] == dataset]
    shown = []
    for g in groups:
        if g["stats"] is None:
            log.warning("skipping empty group %s/%s/%s", dataset, g["model"], g["source"])
        else:
            shown.append(g)
    if not shown:
        return None
    scale = _Scale(*_axis_range([v for g in shown for v in (g["stats"]["min"],
                                                            g["stats"]["max"])]))
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    slot = plot_w / len(shown)
    box_w = min(60.0, slot * 0.5)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" data-dataset={quoteattr(dataset)} '
           f'data-ymin="{scale.lo!r}" data-ymax="{scale.hi!r}" '
           f'data-plot-top="{scale.top}" data-plot-bottom="{scale.bottom}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{WIDTH / 2}" y="30" text-anchor="middle" font-family="sans-serif" '
           f'font-size="20">{escape(dataset.upper())}</text>']
    # y axis, ticks every 0.05
    out.append(f'<line x1="{MARGIN_L}" y1="{scale.top}" x2="{MARGIN_L}" y2="{scale.bottom}" '
               'stroke="black"/>')
    n_ticks = int(round((scale.hi - scale.lo) / 0.05))
    for k in range(n_ticks + 1):
        v = scale.lo + 0.05 * k
        y = _fmt(scale(v))
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{y}" x2="{WIDTH - MARGIN_R}" y2="{y}" '
                   'stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{y}" text-anchor="end" '
                   f'dominant-baseline="middle" font-family="sans-serif" '
                   f'font-size="13">{v:.2f}</text>')
    mid_y = (scale.top + scale.bottom) / 2
    out.append(f'<text x="25" y="{mid_y}" transform="rotate(-90 25 {mid_y})" '
               'text-anchor="middle" font-family="sans-serif" font-size="16">'
               'concordance index</text>')
    for i, g in enumerate(shown):
        st = g["stats"]
        cx = MARGIN_L + slot * (i + 0.5)
        x0, x1 = cx - box_w / 2, cx + box_w / 2
        label = f'{g["model"]} ({g["source"]})'
        attrs = " ".join(f'data-{k}="{st[k]!r}"' for k in ("min", "q1", "median", "q3",
                                                            "max", "mean"))
        out.append(f'<g class="box" data-model={quoteattr(g["model"])} '
                   f'data-source={quoteattr(g["source"])} data-n="{g["n_runs"]}" {attrs}>')
        out.append(f'<line class="whisker" x1="{_fmt(cx)}" y1="{_fmt(scale(st["max"]))}" '
                   f'x2="{_fmt(cx)}" y2="{_fmt(scale(st["min"]))}" stroke="black"/>')
        for key in ("min", "max"):
            y = _fmt(scale(st[key]))
            out.append(f'<line class="cap-{key}" x1="{_fmt(cx - box_w / 4)}" y1="{y}" '
                       f'x2="{_fmt(cx + box_w / 4)}" y2="{y}" stroke="black"/>')
        top, bottom = scale(st["q3"]), scale(st["q1"])
        out.append(f'<rect class="iqr" x="{_fmt(x0)}" y="{_fmt(top)}" width="{_fmt(box_w)}" '
                   f'height="{_fmt(bottom - top)}" fill="#c6dbef" stroke="black"/>')
        y = _fmt(scale(st["median"]))
        out.append(f'<line class="median" x1="{_fmt(x0)}" y1="{y}" x2="{_fmt(x1)}" y2="{y}" '
                   'stroke="red" stroke-width="2"/>')
        my = scale(st["mean"])
        pts = f"{_fmt(cx - 6)},{_fmt(my + 5)} {_fmt(cx + 6)},{_fmt(my + 5)} {_fmt(cx)},{_fmt(my - 6)}"
        out.append(f'<polygon class="mean" points="{pts}" fill="red"/>')
        ly = scale.bottom + 15
        out.append(f'<text x="{_fmt(cx)}" y="{ly}" transform="rotate(35 {_fmt(cx)} {ly})" '
                   f'font-family="sans-serif" font-size="13">{escape(label)}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_boxplot_svg(report, dataset: str, path) -> Path | None:
    """Write the dataset's boxplot; returns None (and writes nothing) if no group has data."""
    svg = render_boxplot_svg(report, dataset)
    if svg is None:
        log.warning("no data for %s; no figure written", dataset)
        return None
    path = Path(path)
    path.write_text(svg)
    return path


def emit_table(report, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for g in report.groups:
            st = g["stats"]
            if st is None:
                continue
            w.writerow([g["dataset"], g["model"], g["source"], repr(st["mean"]),
                        repr(st["median"]), repr(st["q1"]), repr(st["q3"]), repr(st["min"]),
                        repr(st["max"]), g["n_runs"]])
    return path
