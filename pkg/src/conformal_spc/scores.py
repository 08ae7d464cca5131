"""Nonconformity scores.

Three reference-based scores measure absolute distance from the calibration
median of a summary statistic:

* individual values: ``|X - median(X_1..X_n)|``
* subgroup means:    ``|mean(g) - median(means)|``
* subgroup ranges:   ``|range(g) - median(ranges)|``

Two model-based scores use a predictive model ``y_hat(x)`` and, optionally,
a local spread estimate ``sigma_hat(x)``:

* model residual:      ``|y - y_hat(x)|``
* normalized residual: ``|y - y_hat(x)| / sigma_hat(x)``

The median is the only center offered. Another location statistic would slot
in where ``median`` is called in the ``fit_*`` functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    LabeledPoint,
    Observation,
    Subgroup,
    check_finite,
    labeled_arrays,
    median,
    range_of,
    value_array,
)

INDIVIDUAL = "individual_median"
SUBGROUP_MEAN = "subgroup_mean_median"
SUBGROUP_RANGE = "subgroup_range_median"
MODEL_RESIDUAL = "model_residual"
NORMALIZED_RESIDUAL = "normalized_residual"

REFERENCE_KINDS = (INDIVIDUAL, SUBGROUP_MEAN, SUBGROUP_RANGE)
MODEL_KINDS = (MODEL_RESIDUAL, NORMALIZED_RESIDUAL)

SPREAD_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# predictive models
# ---------------------------------------------------------------------------

def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    return X


class PredictiveModel:
    """Base for models usable by the residual scorers.

    Subclasses implement ``predict(X)`` for an (n, d) array. Models that can
    estimate local variability also implement ``spread(X)`` and set
    ``has_spread``.
    """

    has_spread = False
    model_id = "external"

    def predict(self, X) -> np.ndarray:
        raise NotImplementedError

    def spread(self, X) -> np.ndarray:
        raise ValueError("invalid spread estimate")


class FunctionModel(PredictiveModel):
    """Wrap plain callables ``x -> y_hat`` and optionally ``x -> sigma_hat``.

    Callables receive one row of ``X`` (a 1-d array); for scalar inputs that
    row has length 1, so ``lambda x: 2 * x[0]`` is the usual form.
    """

    def __init__(self, predict_fn: Callable, spread_fn: Optional[Callable] = None,
                 model_id: str = "external"):
        self._predict_fn = predict_fn
        self._spread_fn = spread_fn
        self.has_spread = spread_fn is not None
        self.model_id = model_id

    def predict(self, X):
        return np.array([float(self._predict_fn(row)) for row in _as_matrix(X)])

    def spread(self, X):
        if self._spread_fn is None:
            raise ValueError("invalid spread estimate")
        return np.array([float(self._spread_fn(row)) for row in _as_matrix(X)])


class LeastSquaresLine(PredictiveModel):
    """Ordinary least squares with intercept, ``y_hat = intercept + x @ coef``."""

    model_id = "least_squares"

    def __init__(self, coef, intercept: float):
        self.coef = np.asarray(coef, dtype=float).ravel()
        self.intercept = float(intercept)
        check_finite(self.coef)
        check_finite(self.intercept)

    @classmethod
    def fit(cls, X, y) -> "LeastSquaresLine":
        X = _as_matrix(X)
        y = np.asarray(y, dtype=float)
        if X.shape[0] < X.shape[1] + 1:
            raise ValueError("not enough points for a least-squares fit")
        design = np.hstack([np.ones((X.shape[0], 1)), X])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        return cls(beta[1:], beta[0])

    def predict(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.coef.size:
            raise ValueError("dimension mismatch")
        return self.intercept + X @ self.coef


def _pairwise_sq(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)


def nearest_neighbors(reference: np.ndarray, queries: np.ndarray, k: int,
                      chunk: int = 2048):
    """Indices and Euclidean distances of the ``k`` nearest reference rows.

    Brute force in chunks; neighbors come back sorted by distance.
    """
    n_q = queries.shape[0]
    idx = np.empty((n_q, k), dtype=np.intp)
    dist = np.empty((n_q, k))
    for start in range(0, n_q, chunk):
        block = queries[start:start + chunk]
        d2 = _pairwise_sq(block, reference)
        if k < reference.shape[0]:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        else:
            part = np.broadcast_to(np.arange(k), (block.shape[0], k))
        order = np.argsort(np.take_along_axis(d2, part, axis=1), axis=1, kind="stable")
        part = np.take_along_axis(part, order, axis=1)
        idx[start:start + chunk] = part
        dist[start:start + chunk] = np.sqrt(np.take_along_axis(d2, part, axis=1))
    return idx, dist


class KNNRegressor(PredictiveModel):
    """k-nearest-neighbor mean regressor with a local spread estimate.

    ``spread(x)`` is the sample standard deviation (n - 1 denominator) of the
    neighbors' ``y`` values, floored at ``SPREAD_FLOOR`` so it is always
    strictly positive.
    """

    model_id = "knn"
    has_spread = True

    def __init__(self, X, y, k: int = 10):
        self.X = _as_matrix(X)
        self.y = np.asarray(y, dtype=float)
        self.k = int(k)
        if self.k < 2:
            raise ValueError("knn regressor needs k >= 2 for a spread estimate")
        if self.k > self.X.shape[0]:
            raise ValueError("k too large")
        check_finite(self.X)
        check_finite(self.y)

    @classmethod
    def fit(cls, X, y, k: int = 10) -> "KNNRegressor":
        return cls(X, y, k)

    def _neighbors(self, X):
        X = _as_matrix(X)
        if X.shape[1] != self.X.shape[1]:
            raise ValueError("dimension mismatch")
        idx, _ = nearest_neighbors(self.X, X, self.k)
        return self.y[idx]

    def predict(self, X):
        return self._neighbors(X).mean(axis=1)

    def spread(self, X):
        return np.maximum(self._neighbors(X).std(axis=1, ddof=1), SPREAD_FLOOR)

    def predict_with_spread(self, X):
        ys = self._neighbors(X)
        return ys.mean(axis=1), np.maximum(ys.std(axis=1, ddof=1), SPREAD_FLOOR)


# ---------------------------------------------------------------------------
# scorers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NonconformityScorer:
    """A fitted score function. ``reference`` is frozen at fit time."""

    kind: str
    reference: Optional[float] = None
    model: Optional[PredictiveModel] = None

    @property
    def scorer_id(self) -> str:
        return self.kind

    @property
    def center(self) -> Optional[float]:
        return self.reference

    def _stat(self, item) -> float:
        if self.kind == INDIVIDUAL:
            return item.value if isinstance(item, Observation) else float(item)
        g = item if isinstance(item, Subgroup) else Subgroup(0, tuple(item))
        return g.mean if self.kind == SUBGROUP_MEAN else range_of(g)

    def score(self, item) -> float:
        """Score one item: a value/Observation, a Subgroup, or an ``(x, y)`` pair."""
        if self.kind in MODEL_KINDS:
            if not isinstance(item, LabeledPoint):
                item = LabeledPoint(*item)
            return float(self.score_many([item])[0])
        stat = self._stat(item)
        if not math.isfinite(stat):
            raise ValueError("non-finite value")
        return abs(stat - self.reference)

    def score_many(self, items) -> np.ndarray:
        if self.kind == INDIVIDUAL:
            return np.abs(value_array(items) - self.reference)
        if self.kind in (SUBGROUP_MEAN, SUBGROUP_RANGE):
            return np.array([abs(self._stat(g) - self.reference) for g in items], dtype=float)
        if len(items) == 0:
            return np.empty(0)
        X, y = labeled_arrays(items)
        return self.score_arrays(X, y)

    def score_arrays(self, X, y) -> np.ndarray:
        """Model scores for stacked inputs ``X`` (n, d) and targets ``y`` (n,)."""
        y = np.asarray(y, dtype=float)
        y_hat, sigma = predict_interval_parts(self.model, X, self.kind == NORMALIZED_RESIDUAL)
        resid = np.abs(y - y_hat)
        if self.kind == MODEL_RESIDUAL:
            return resid
        return resid / sigma


def _checked_prediction(model: PredictiveModel, X) -> np.ndarray:
    y_hat = np.asarray(model.predict(X), dtype=float)
    if not np.all(np.isfinite(y_hat)):
        raise ValueError("model output invalid")
    return y_hat


def _checked_spread(model: PredictiveModel, X) -> np.ndarray:
    if not model.has_spread:
        raise ValueError("invalid spread estimate")
    sigma = np.asarray(model.spread(X), dtype=float)
    if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
        raise ValueError("invalid spread estimate")
    return sigma


def predict_interval_parts(model: PredictiveModel, X, need_spread: bool):
    """``(y_hat, sigma_hat)`` with validation; sigma is None when not needed."""
    if need_spread and hasattr(model, "predict_with_spread"):
        y_hat, sigma = model.predict_with_spread(X)
        if not np.all(np.isfinite(y_hat)):
            raise ValueError("model output invalid")
        if not np.all(np.isfinite(sigma)) or np.any(sigma <= 0):
            raise ValueError("invalid spread estimate")
        return y_hat, sigma
    y_hat = _checked_prediction(model, X)
    return y_hat, (_checked_spread(model, X) if need_spread else None)


def fit_individual(calibration) -> NonconformityScorer:
    values = value_array(calibration)
    if values.size == 0:
        raise ValueError("empty calibration")
    return NonconformityScorer(INDIVIDUAL, reference=median(values))


def _subgroups(calibration):
    if len(calibration) == 0:
        raise ValueError("empty calibration")
    return [g if isinstance(g, Subgroup) else Subgroup(i, tuple(g))
            for i, g in enumerate(calibration)]


def fit_subgroup_mean(calibration) -> NonconformityScorer:
    groups = _subgroups(calibration)
    return NonconformityScorer(SUBGROUP_MEAN, reference=median([g.mean for g in groups]))


def fit_subgroup_range(calibration) -> NonconformityScorer:
    groups = _subgroups(calibration)
    return NonconformityScorer(SUBGROUP_RANGE, reference=median([range_of(g) for g in groups]))


def fit_model_residual(model: PredictiveModel) -> NonconformityScorer:
    return NonconformityScorer(MODEL_RESIDUAL, model=model)


def fit_normalized_residual(model: PredictiveModel) -> NonconformityScorer:
    if not model.has_spread:
        raise ValueError("invalid spread estimate")
    return NonconformityScorer(NORMALIZED_RESIDUAL, model=model)
