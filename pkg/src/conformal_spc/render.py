"""SVG charts and tab-separated report tables.

Output is plain text built by hand so it is byte-stable: numbers are printed
with fixed ``%.2f`` (coordinates) or ``%.6g`` (table values), never through
locale-aware formatting. Only ``line``, ``circle``, ``rect``, ``text`` and
``polyline`` elements are emitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional
from xml.sax.saxutils import escape

import numpy as np

from .charts import (
    CONFORMAL_INTERVAL,
    CONFORMAL_SCORE,
    P_VALUE,
    SHEWHART,
    UNCERTAINTY_SPIKE,
    ChartSeries,
    ShewhartLimits,
)
from .core import Signal

REPORT_COLUMNS = ("chart", "pre_shift_alarm_rate", "post_shift_detection_rate", "first_detection_index")

_TITLES = {
    SHEWHART: "Shewhart individuals chart",
    CONFORMAL_SCORE: "Conformal score chart",
    CONFORMAL_INTERVAL: "Conformal interval chart",
    UNCERTAINTY_SPIKE: "Uncertainty spike chart",
    P_VALUE: "Conformal p-value chart",
}


@dataclass(frozen=True)
class RenderSpec:
    width: int = 800
    height: int = 360
    show_alpha_line: bool = True
    annotate_flags: bool = True
    title: Optional[str] = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("dimensions must be positive")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _hlines(series: ChartSeries) -> list:
    """(y, css class) for every horizontal reference line of the chart kind."""
    lim = series.limits
    if series.kind == SHEWHART and isinstance(lim, ShewhartLimits):
        return [(lim.ucl, "limit"), (lim.center, "center"), (lim.lcl, "limit")]
    if series.kind == CONFORMAL_SCORE and lim is not None:
        return [(float(lim), "limit")]
    return []


class _Frame:
    left, right, top, bottom = 60.0, 20.0, 36.0, 36.0

    def __init__(self, spec: RenderSpec, n: int, y_lo: float, y_hi: float):
        self.spec = spec
        self.n = n
        self.y_lo, self.y_hi = y_lo, y_hi
        self.pw = spec.width - self.left - self.right
        self.ph = spec.height - self.top - self.bottom

    def x(self, pos: int) -> float:
        if self.n <= 1:
            return self.left + self.pw / 2
        return self.left + self.pw * pos / (self.n - 1)

    def y(self, v: float) -> float:
        return self.top + self.ph * (self.y_hi - v) / (self.y_hi - self.y_lo)

    @property
    def step(self) -> float:
        return self.pw / max(self.n - 1, 1)


def _y_range(series: ChartSeries) -> tuple:
    if series.kind == P_VALUE:
        return 0.0, 1.0
    vals = [p.value for p in series.points]
    vals += [p.lower for p in series.points if p.lower is not None]
    vals += [p.upper for p in series.points if p.upper is not None]
    vals += [y for y, _ in _hlines(series)]
    lo, hi = float(np.min(vals)), float(np.max(vals))
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.05
    return lo - pad, hi + pad


def render_chart(series: ChartSeries, spec: RenderSpec = RenderSpec()) -> str:
    if not len(series):
        raise ValueError("nothing to render")
    lo, hi = _y_range(series)
    fr = _Frame(spec, len(series), lo, hi)
    title = spec.title if spec.title is not None else _TITLES[series.kind]
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" '
        f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
        f'<rect class="background" x="0" y="0" width="{spec.width}" height="{spec.height}" fill="white"/>',
        f'<rect class="frame" x="{_f(fr.left)}" y="{_f(fr.top)}" width="{_f(fr.pw)}" '
        f'height="{_f(fr.ph)}" fill="none" stroke="#444444" stroke-width="1"/>',
        f'<text class="title" x="{_f(spec.width / 2)}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]
    for v in (lo, hi):
        out.append(f'<text class="tick" x="{_f(fr.left - 6)}" y="{_f(fr.y(v) + 4)}" '
                   f'text-anchor="end" font-family="sans-serif" font-size="10">{v:.3g}</text>')

    if series.kind in (CONFORMAL_INTERVAL, UNCERTAINTY_SPIKE):
        w = max(fr.step, 1.0)
        for pos, p in enumerate(series.points):
            top, bot = fr.y(p.upper), fr.y(p.lower)
            out.append(f'<rect class="band" x="{_f(fr.x(pos) - w / 2)}" y="{_f(top)}" '
                       f'width="{_f(w)}" height="{_f(bot - top)}" fill="#9ecae1" fill-opacity="0.5"/>')

    for y, css in _hlines(series):
        dash = ' stroke-dasharray="4 3"' if css == "center" else ""
        out.append(f'<line class="{css}" x1="{_f(fr.left)}" y1="{_f(fr.y(y))}" '
                   f'x2="{_f(fr.left + fr.pw)}" y2="{_f(fr.y(y))}" stroke="#d62728"{dash}/>')
    if series.kind == P_VALUE and spec.show_alpha_line and series.alpha is not None:
        ya = _f(fr.y(series.alpha))
        out.append(f'<line class="alpha-line" x1="{_f(fr.left)}" y1="{ya}" '
                   f'x2="{_f(fr.left + fr.pw)}" y2="{ya}" stroke="#d62728" stroke-width="1.5"/>')

    coords = " ".join(f"{_f(fr.x(i))},{_f(fr.y(p.value))}" for i, p in enumerate(series.points))
    out.append(f'<polyline class="series" points="{coords}" fill="none" stroke="#1f77b4" stroke-width="1"/>')

    if spec.annotate_flags:
        for pos, p in enumerate(series.points):
            if not p.flagged:
                continue
            kinds = []
            if p.signal & Signal.LIMIT_EXCEEDED:
                kinds.append("limit")
            if p.signal & Signal.UNCERTAINTY_SPIKE:
                kinds.append("spike")
            color = "#d62728" if "limit" in kinds else "#ff7f0e"
            out.append(f'<circle class="flag {" ".join(kinds)}" cx="{_f(fr.x(pos))}" '
                       f'cy="{_f(fr.y(p.value))}" r="3.5" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _fmt_rate(v: Optional[float]) -> str:
    return "" if v is None else format(v, ".6g")


def render_report(report) -> str:
    """One row per repetition and chart, in repetition order."""
    lines = ["\t".join(REPORT_COLUMNS)]
    for o in report.outcomes:
        lines.append("\t".join([
            o.chart,
            _fmt_rate(o.pre_shift_alarm_rate),
            _fmt_rate(o.post_shift_detection_rate),
            "" if o.first_detection_index is None else str(o.first_detection_index),
        ]))
    return "\n".join(lines) + "\n"


def render_summary(report) -> str:
    """Pooled rates per chart; the index column holds the median first detection."""
    lines = ["\t".join(REPORT_COLUMNS)]
    if not report.outcomes:
        return lines[0] + "\n"
    for chart in report.CHARTS:
        lines.append("\t".join([
            chart,
            _fmt_rate(report.pre_shift_alarm_rate(chart)),
            _fmt_rate(report.post_shift_detection_rate(chart)),
            _fmt_rate(report.median_first_detection(chart)),
        ]))
    return "\n".join(lines) + "\n"
