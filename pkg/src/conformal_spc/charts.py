"""Control charts as plain data.

Each chart function returns a :class:`ChartSeries`; nothing here draws. The
render module turns a series into SVG.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import calibration as cal
from .core import CalibrationModel, ChartPoint, LabeledPoint, Signal, item_indices, labeled_arrays, value_array
from .scores import MODEL_RESIDUAL, NORMALIZED_RESIDUAL, predict_interval_parts

SHEWHART = "shewhart"
CONFORMAL_SCORE = "conformal_score"
CONFORMAL_INTERVAL = "conformal_interval"
UNCERTAINTY_SPIKE = "uncertainty_spike"
P_VALUE = "p_value"

KINDS = (SHEWHART, CONFORMAL_SCORE, CONFORMAL_INTERVAL, UNCERTAINTY_SPIKE, P_VALUE)


@dataclass(frozen=True)
class ShewhartLimits:
    center: float
    ucl: float
    lcl: float
    sigma: float

    @classmethod
    def from_sample(cls, values) -> "ShewhartLimits":
        values = value_array(values)
        if values.size < 2:
            raise ValueError("need >=2 points for std")
        center = float(values.mean())
        sigma = float(values.std(ddof=1))
        return cls(center, center + 3 * sigma, center - 3 * sigma, sigma)


@dataclass(frozen=True)
class ChartSeries:
    """Ordered chart points plus whatever limit the chart kind uses.

    ``limits`` holds ``q`` for score and interval charts, a
    :class:`ShewhartLimits` for the Shewhart chart, and the width threshold for
    the uncertainty-spike chart. The p-value chart keeps its line in ``alpha``.
    """

    kind: str
    points: tuple
    alpha: Optional[float] = None
    limits: Union[None, float, ShewhartLimits] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown chart kind {self.kind!r}")
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self):
        return len(self.points)

    @property
    def values(self) -> np.ndarray:
        return np.array([p.value for p in self.points], dtype=float)

    def flags(self, signal: Signal = Signal.LIMIT_EXCEEDED) -> np.ndarray:
        return np.array([bool(p.signal & signal) for p in self.points], dtype=bool)

    @property
    def flagged_indices(self) -> list:
        return [p.index for p in self.points if p.flagged]


def _points(indices, values, flags, lower=None, upper=None, spikes=None) -> tuple:
    out = []
    for i, idx in enumerate(indices):
        sig = Signal.LIMIT_EXCEEDED if flags[i] else Signal.NONE
        if spikes is not None and spikes[i]:
            sig |= Signal.UNCERTAINTY_SPIKE
        out.append(ChartPoint(
            int(idx), float(values[i]),
            None if lower is None else float(lower[i]),
            None if upper is None else float(upper[i]),
            sig,
        ))
    return tuple(out)


def _check_match(model: CalibrationModel, scorer) -> None:
    if model.scorer_id != scorer.scorer_id:
        raise ValueError("calibration mismatch")
    center = getattr(scorer, "center", None)
    if center is not None and model.center is not None and center != model.center:
        raise ValueError("calibration mismatch")


def shewhart_chart(calibration, stream) -> ChartSeries:
    """Individuals chart with limits at calibration mean +/- 3 sample std."""
    limits = ShewhartLimits.from_sample(calibration)
    values = value_array(stream) if len(stream) else np.empty(0)
    flags = (values > limits.ucl) | (values < limits.lcl)
    return ChartSeries(SHEWHART, _points(item_indices(stream), values, flags), limits=limits)


def conformal_score_chart(model: CalibrationModel, scorer, stream) -> ChartSeries:
    _check_match(model, scorer)
    scores = scorer.score_many(stream) if len(stream) else np.empty(0)
    flags = cal.alarms(model, scores)
    return ChartSeries(CONFORMAL_SCORE, _points(item_indices(stream), scores, flags),
                       alpha=model.alpha, limits=model.q)


def conformal_interval_chart(model: CalibrationModel, predictive,
                             stream: Sequence[LabeledPoint]) -> ChartSeries:
    """Interval ``[y_hat - q, y_hat + q]`` around each prediction.

    The flag is ``|y - y_hat| > q``, which is the containment test stated on
    the residual so both readings agree exactly.
    """
    if model.scorer_id != MODEL_RESIDUAL:
        raise ValueError("chart kind requires model-residual archive")
    if not len(stream):
        return ChartSeries(CONFORMAL_INTERVAL, (), alpha=model.alpha, limits=model.q)
    X, y = labeled_arrays(stream)
    y_hat, _ = predict_interval_parts(predictive, X, need_spread=False)
    resid = np.abs(y - y_hat)
    flags = cal.alarms(model, resid)
    pts = _points(range(len(stream)), y, flags, y_hat - model.q, y_hat + model.q)
    return ChartSeries(CONFORMAL_INTERVAL, pts, alpha=model.alpha, limits=model.q)


def width_threshold(q: float, calibration_spreads, width_alpha: float) -> float:
    """Conformal quantile of calibration interval widths ``2 q sigma_hat``."""
    widths = np.sort(2.0 * q * np.asarray(calibration_spreads, dtype=float))
    if widths.size == 0:
        raise ValueError("empty calibration")
    k = cal.conformal_quantile_index(widths.size, width_alpha)
    return float(widths[k - 1])


def uncertainty_spike_chart(model: CalibrationModel, predictive,
                            stream: Sequence[LabeledPoint],
                            calibration: Sequence[LabeledPoint],
                            width_alpha: float = 0.05) -> ChartSeries:
    """Adaptive interval ``y_hat +/- q sigma_hat`` with an uncertainty-spike signal.

    A point is a spike when its width ``2 q sigma_hat(x)`` is strictly larger
    than the conformal ``width_alpha`` quantile of the widths over the
    calibration inputs. ``limit_exceeded`` (``y`` outside the interval) is
    decided independently, so a point can carry both flags.
    """
    if model.scorer_id != NORMALIZED_RESIDUAL:
        raise ValueError("chart kind requires normalized-residual archive")
    if not getattr(predictive, "has_spread", False):
        raise ValueError("invalid spread estimate")
    cal.alpha_fraction(width_alpha)
    X_cal, _ = labeled_arrays(calibration)
    _, cal_sigma = predict_interval_parts(predictive, X_cal, need_spread=True)
    threshold = width_threshold(model.q, cal_sigma, width_alpha)
    if not len(stream):
        return ChartSeries(UNCERTAINTY_SPIKE, (), alpha=model.alpha, limits=threshold)
    X, y = labeled_arrays(stream)
    y_hat, sigma = predict_interval_parts(predictive, X, need_spread=True)
    half = model.q * sigma
    flags = cal.alarms(model, np.abs(y - y_hat) / sigma)
    spikes = 2.0 * model.q * sigma > threshold
    pts = _points(range(len(stream)), y, flags, y_hat - half, y_hat + half, spikes)
    return ChartSeries(UNCERTAINTY_SPIKE, pts, alpha=model.alpha, limits=threshold)


def p_value_chart(model: CalibrationModel, scorer, stream,
                  alpha: Optional[float] = None) -> ChartSeries:
    """Conformal p-value per point with a single line at ``alpha``.

    Flags ``p <= alpha``; with the smoothed p-value this is the same point set
    as ``score > q`` when ``alpha`` equals the calibration alpha.
    """
    _check_match(model, scorer)
    alpha = model.alpha if alpha is None else float(alpha)
    scores = scorer.score_many(stream) if len(stream) else np.empty(0)
    pv = cal.p_values(model, scores)
    flags = cal.p_value_flags(model, scores, alpha)
    return ChartSeries(P_VALUE, _points(item_indices(stream), pv, flags), alpha=alpha)


def first_flag(series: ChartSeries, signal: Signal = Signal.LIMIT_EXCEEDED,
               start: int = 0) -> Optional[int]:
    """Position (not index label) of the first point at or after ``start`` carrying ``signal``."""
    for pos in range(start, len(series.points)):
        if series.points[pos].signal & signal:
            return pos
    return None
