"""Multivariate process monitoring as conformal anomaly detection.

Train an unsupervised detector on in-control process vectors, calibrate its
scores on a disjoint in-control set, then monitor new vectors through
conformal p-values. The false-alarm guarantee comes from the calibration step
alone, so any detector that returns a non-negative score can be plugged in;
a poor detector costs power, never validity.

Train/calibration disjointness cannot be checked here. Use
:func:`conformal_spc.calibration.split` upstream.
"""

from __future__ import annotations

import numpy as np

from . import calibration as cal
from .charts import ChartSeries, p_value_chart
from .core import CalibrationModel, vector_array
from .scores import nearest_neighbors

KNN_DISTANCE = "knn_distance"
MAHALANOBIS = "mahalanobis"


class DetectorModel:
    """Trained anomaly scorer over fixed-dimension vectors.

    Subclasses set ``kind`` and ``dimension`` and implement ``_score``
    on an (n, d) array. Higher scores mean more anomalous.
    """

    kind = "detector"
    dimension: int

    @property
    def scorer_id(self) -> str:
        return f"detector:{self.kind}"

    def _matrix(self, vectors) -> np.ndarray:
        X = vectors if isinstance(vectors, np.ndarray) else vector_array(vectors)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[0] and X.shape[1] != self.dimension:
            raise ValueError("dimension mismatch")
        return np.asarray(X, dtype=float)

    def score_many(self, vectors) -> np.ndarray:
        X = self._matrix(vectors)
        if X.shape[0] == 0:
            return np.empty(0)
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite value")
        return self._score(X)

    def score(self, vector) -> float:
        return float(self.score_many([vector])[0])

    def _score(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class KNNDetector(DetectorModel):
    """Mean Euclidean distance to the ``k`` nearest training vectors."""

    kind = KNN_DISTANCE

    def __init__(self, train: np.ndarray, k: int):
        self.train = np.array(train, dtype=float)
        self.train.flags.writeable = False
        self.k = int(k)
        self.dimension = self.train.shape[1]

    def _score(self, X):
        _, dist = nearest_neighbors(self.train, X, self.k)
        return dist.mean(axis=1)


class MahalanobisDetector(DetectorModel):
    """``sqrt((v - mu)^T P (v - mu))`` with ``P`` the ridge-regularised precision matrix."""

    kind = MAHALANOBIS

    def __init__(self, mean, precision, ridge: float):
        self.mean = np.array(mean, dtype=float)
        self.precision = np.array(precision, dtype=float)
        self.mean.flags.writeable = False
        self.precision.flags.writeable = False
        self.ridge = float(ridge)
        self.dimension = self.mean.size

    def _score(self, X):
        diff = X - self.mean
        quad = np.einsum("ij,jk,ik->i", diff, self.precision, diff)
        return np.sqrt(np.maximum(quad, 0.0))


def train_knn(train, k: int = 5) -> KNNDetector:
    X = vector_array(train)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if k < 1:
        raise ValueError("k must be positive")
    if k > X.shape[0]:
        raise ValueError("k too large")
    return KNNDetector(X, k)


def default_ridge(cov: np.ndarray) -> float:
    return 1e-6 * float(np.trace(cov)) / cov.shape[0]


def train_mahalanobis(train, ridge: float | None = None) -> MahalanobisDetector:
    X = vector_array(train)
    if X.shape[0] < 2:
        raise ValueError("need >=2 points for covariance")
    mu = X.mean(axis=0)
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    if ridge is None:
        ridge = default_ridge(cov)
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    reg = cov + ridge * np.eye(cov.shape[0])
    try:
        np.linalg.cholesky(reg)
        precision = np.linalg.inv(reg)
    except np.linalg.LinAlgError:
        raise ValueError("singular covariance") from None
    if not np.all(np.isfinite(precision)):
        raise ValueError("singular covariance")
    precision = (precision + precision.T) / 2
    return MahalanobisDetector(mu, precision, ridge)


def calibrate_detector(detector: DetectorModel, calib, alpha: float) -> CalibrationModel:
    return cal.calibrate(detector, calib, alpha)


def monitor(detector: DetectorModel, model: CalibrationModel, stream,
            alpha: float | None = None) -> ChartSeries:
    """Conformal p-value chart of detector scores over ``stream``."""
    return p_value_chart(model, detector, stream, alpha)
