"""Shared data model: observations, subgroups, calibration artifacts, chart output.

Every record here is immutable. Non-finite numbers are rejected at construction,
because a single NaN in a sorted score list silently voids the coverage
guarantee.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Union

import numpy as np


def check_finite(values, what: str = "value") -> None:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite {what}")


@dataclass(frozen=True)
class Observation:
    index: int
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("non-finite value")


@dataclass(frozen=True)
class Subgroup:
    index: int
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) < 2:
            raise ValueError("subgroup too small")
        check_finite(self.values)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def range(self) -> float:
        return range_of(self)


@dataclass(frozen=True)
class LabeledPoint:
    """A process-parameter vector ``x`` paired with a quality characteristic ``y``."""

    x: tuple
    y: float

    def __post_init__(self):
        x = self.x
        if np.ndim(x) == 0:
            x = (x,)
        object.__setattr__(self, "x", tuple(float(v) for v in x))
        check_finite(self.x)
        if not math.isfinite(self.y):
            raise ValueError("non-finite value")


@dataclass(frozen=True)
class ProcessVector:
    index: int
    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(float(v) for v in self.components))
        if not self.components:
            raise ValueError("empty process vector")
        check_finite(self.components)

    @property
    def dimension(self) -> int:
        return len(self.components)


class Signal(enum.Flag):
    """Chart signal flags. A point may carry several at once."""

    NONE = 0
    LIMIT_EXCEEDED = enum.auto()
    UNCERTAINTY_SPIKE = enum.auto()


@dataclass(frozen=True)
class ChartPoint:
    index: int
    value: float
    lower: Optional[float] = None
    upper: Optional[float] = None
    signal: Signal = Signal.NONE

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower > self.upper:
            raise ValueError("lower bound above upper bound")

    @property
    def flagged(self) -> bool:
        return self.signal != Signal.NONE


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    """Frozen in-control score distribution with its threshold.

    ``q`` must be the k-th smallest score with ``k = ceil((1 - alpha)(n + 1))``
    clamped to ``n``; this is re-checked on construction so a hand-edited or
    deserialized model cannot carry an inconsistent threshold.
    """

    scores: tuple
    alpha: float
    q: float
    center: Optional[float] = None
    scorer_id: str = "unknown"

    def __post_init__(self):
        # local import: calibration depends on core
        from .calibration import conformal_quantile_index

        scores = tuple(float(s) for s in self.scores)
        object.__setattr__(self, "scores", scores)
        if not scores:
            raise ValueError("empty sample")
        check_finite(scores, "score")
        if any(b < a for a, b in zip(scores, scores[1:])):
            raise ValueError("scores not sorted")
        if scores[0] < 0:
            raise ValueError("negative score")
        k = conformal_quantile_index(len(scores), self.alpha, warn=False)
        if self.q != scores[k - 1]:
            raise ValueError("threshold inconsistent with scores")

    @property
    def n(self) -> int:
        return len(self.scores)

    @property
    def k(self) -> int:
        from .calibration import conformal_quantile_index

        return conformal_quantile_index(self.n, self.alpha, warn=False)

    @property
    def clamped(self) -> bool:
        from .calibration import raw_quantile_index

        return raw_quantile_index(self.n, self.alpha) > self.n

    @cached_property
    def score_array(self) -> np.ndarray:
        arr = np.asarray(self.scores, dtype=float)
        arr.flags.writeable = False
        return arr

    def __eq__(self, other):
        if not isinstance(other, CalibrationModel):
            return NotImplemented
        return (
            self.scores == other.scores
            and self.alpha == other.alpha
            and self.q == other.q
            and self.center == other.center
            and self.scorer_id == other.scorer_id
        )

    def __hash__(self):
        return hash((self.scores, self.alpha, self.q, self.center, self.scorer_id))


def median(values: Iterable[float]) -> float:
    """Sample median; even-length samples average the two middle order statistics."""
    if not isinstance(values, np.ndarray):
        values = list(values)
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("empty sample")
    check_finite(arr)
    mid = arr.size // 2
    if arr.size % 2:
        return float(arr[mid])
    return float((arr[mid - 1] + arr[mid]) / 2)


def range_of(subgroup: Union[Subgroup, Sequence[float]]) -> float:
    values = subgroup.values if isinstance(subgroup, Subgroup) else tuple(subgroup)
    if len(values) < 2:
        raise ValueError("subgroup too small")
    check_finite(values)
    return float(max(values) - min(values))


def observations(values: Iterable[float], start: int = 0) -> list:
    return [Observation(start + i, float(v)) for i, v in enumerate(values)]


def process_vectors(rows, start: int = 0) -> list:
    return [ProcessVector(start + i, tuple(r)) for i, r in enumerate(np.asarray(rows, dtype=float))]


def labeled_points(X, y) -> list:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return [LabeledPoint(tuple(row), float(v)) for row, v in zip(X, np.asarray(y, dtype=float))]


def labeled_arrays(points: Sequence[LabeledPoint]):
    """Stack labeled points into ``(X, y)`` arrays; ``X`` has shape (n, d)."""
    if not points:
        return np.empty((0, 0)), np.empty(0)
    dims = {len(p.x) for p in points}
    if len(dims) != 1:
        raise ValueError("dimension mismatch")
    X = np.array([p.x for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    return X, y


def vector_array(vectors) -> np.ndarray:
    if len(vectors) == 0:
        return np.empty((0, 0))
    rows = [v.components if isinstance(v, ProcessVector) else tuple(v) for v in vectors]
    if len({len(r) for r in rows}) != 1:
        raise ValueError("dimension mismatch")
    arr = np.array(rows, dtype=float)
    check_finite(arr)
    return arr


def value_array(items) -> np.ndarray:
    """Values of a sequence of Observations or plain numbers."""
    if isinstance(items, np.ndarray):
        arr = items.astype(float, copy=False)
        check_finite(arr)
        return arr
    arr = np.array([o.value if isinstance(o, Observation) else o for o in items], dtype=float)
    check_finite(arr)
    return arr


def item_indices(items) -> list:
    """Sequence numbers carried by the items, falling back to position."""
    if isinstance(items, np.ndarray):
        return list(range(len(items)))
    out = []
    for pos, item in enumerate(items):
        idx = getattr(item, "index", pos)
        out.append(idx if isinstance(idx, (int, np.integer)) else pos)
    return out
