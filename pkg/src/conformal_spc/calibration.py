"""Split-conformal control limits and conformal p-values.

The threshold ``q`` is the ``ceil((1 - alpha)(n + 1))``-th smallest calibration
score. A new point is out of control when its score is strictly above ``q``.

The p-value is the smoothed rank ``(1 + #{scores >= s}) / (n + 1)``. With that
form, ``score > q`` and ``p <= alpha`` pick out exactly the same points, which
is what lets the score chart and the p-value chart agree point for point.

Index arithmetic is done on the decimal value of ``alpha`` (``0.05`` means
exactly 1/20), so ``ceil(0.95 * 20)`` is 19 and not 20 through float rounding.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import CalibrationModel, check_finite


class QuantileClampWarning(UserWarning):
    """Calibration set too small for the requested alpha; q is the largest score."""


def alpha_fraction(alpha: float) -> Fraction:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise ValueError("invalid alpha")
    return Fraction(repr(alpha))


def raw_quantile_index(n: int, alpha: float) -> int:
    """``ceil((1 - alpha)(n + 1))`` without clamping."""
    a = alpha_fraction(alpha)
    return math.ceil((1 - a) * (int(n) + 1))


def required_calibration_size(alpha: float) -> int:
    """Smallest n for which the quantile index does not need clamping."""
    a = alpha_fraction(alpha)
    return math.ceil((1 - a) / a)


def conformal_quantile_index(n: int, alpha: float, warn: bool = True) -> int:
    """Rank (1-based) of the calibration score used as the control limit.

    Returns ``k = ceil((1 - alpha)(n + 1))``. When ``k > n`` the finite-sample
    guarantee cannot be met and ``k`` is clamped to ``n``; a
    :class:`QuantileClampWarning` is issued unless ``warn`` is false.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    k = raw_quantile_index(n, alpha)
    if k > n:
        if warn:
            warnings.warn(
                f"alpha={alpha} needs n >= {required_calibration_size(alpha)} calibration "
                f"points, got n={n}; using the largest score as the limit",
                QuantileClampWarning,
                stacklevel=2,
            )
        k = int(n)
    return k


def _check_scores(scores) -> np.ndarray:
    arr = np.asarray(scores, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty sample")
    check_finite(arr, "score")
    if np.any(arr < 0):
        raise ValueError("negative score")
    return arr


def fit(scores, alpha: float, center: Optional[float] = None,
        scorer_id: str = "unknown") -> CalibrationModel:
    """Freeze calibration scores into a :class:`CalibrationModel`.

    Ties are kept; the order statistic is taken over the multiset.
    """
    arr = np.sort(_check_scores(scores))
    k = conformal_quantile_index(arr.size, alpha)
    return CalibrationModel(
        scores=tuple(arr.tolist()),
        alpha=float(alpha),
        q=float(arr[k - 1]),
        center=center,
        scorer_id=scorer_id,
    )


def calibrate(scorer, items, alpha: float) -> CalibrationModel:
    """Score ``items`` with a fitted scorer (or detector) and fit the threshold."""
    return fit(scorer.score_many(items), alpha,
               center=getattr(scorer, "center", None), scorer_id=scorer.scorer_id)


def _query(score) -> float:
    s = float(score)
    if not math.isfinite(s):
        raise ValueError("non-finite score")
    if s < 0:
        raise ValueError("negative score")
    return s


def is_out_of_control(model: CalibrationModel, score: float) -> bool:
    return _query(score) > model.q


def alarms(model: CalibrationModel, scores) -> np.ndarray:
    """Vectorised :func:`is_out_of_control`."""
    arr = _check_scores(scores) if np.size(scores) else np.empty(0)
    return arr > model.q


def count_at_least(model: CalibrationModel, scores) -> np.ndarray:
    """Number of calibration scores ``>= s`` for each query score."""
    arr = np.asarray(scores, dtype=float)
    return model.n - np.searchsorted(model.score_array, arr, side="left")


def conformal_p_value(model: CalibrationModel, score: float) -> float:
    c = int(count_at_least(model, _query(score)))
    return (1 + c) / (model.n + 1)


def p_values(model: CalibrationModel, scores) -> np.ndarray:
    """Vectorised :func:`conformal_p_value`."""
    arr = _check_scores(scores) if np.size(scores) else np.empty(0)
    return (1 + count_at_least(model, arr)) / (model.n + 1)


def max_flag_count(n: int, alpha: float) -> int:
    """Largest ``#{scores >= s}`` for which the p-value is a signal at level alpha.

    ``p <= alpha`` is ``1 + c <= alpha (n + 1)``, i.e. ``c <= floor(alpha (n + 1)) - 1``.
    When alpha is below the smallest attainable p-value ``1/(n+1)`` this floors
    at 0, so only scores above every calibration score are signalled; that is
    the same point set the clamped threshold flags.
    """
    a = alpha_fraction(alpha)
    return max(math.floor(a * (int(n) + 1)) - 1, 0)


def p_value_flags(model: CalibrationModel, scores, alpha: Optional[float] = None) -> np.ndarray:
    """``p <= alpha`` decided on integer counts, so no float rounding can flip a flag."""
    alpha = model.alpha if alpha is None else alpha
    arr = _check_scores(scores) if np.size(scores) else np.empty(0)
    return count_at_least(model, arr) <= max_flag_count(model.n, alpha)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")


def split_sizes(n: int, train_fraction: float) -> tuple:
    n_train = math.floor(Fraction(repr(float(train_fraction))) * n)
    return n_train, n - n_train


def split(data: Sequence, spec: SplitSpec = SplitSpec()):
    """Shuffle ``data`` with a seeded permutation and cut it into (train, calibration).

    The two parts are disjoint and exhaustive with sizes ``floor(f N)`` and
    ``N - floor(f N)``. Lists come back as lists, arrays as arrays.
    """
    n = len(data)
    n_train, n_calib = split_sizes(n, spec.train_fraction)
    if n_train < 1 or n_calib < 1:
        raise ValueError("split too extreme")
    perm = np.random.default_rng(spec.seed).permutation(n)
    train_idx, calib_idx = np.sort(perm[:n_train]), np.sort(perm[n_train:])
    if isinstance(data, np.ndarray):
        return data[train_idx], data[calib_idx]
    return [data[i] for i in train_idx], [data[i] for i in calib_idx]
