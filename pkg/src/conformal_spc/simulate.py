"""Seeded process simulations and chart comparisons.

All randomness comes from numpy's ``PCG64`` bit generator. Repetition ``r`` of
a spec with seed ``s`` draws from ``default_rng([s, r])``, so each repetition is
reproducible on its own and serial or parallel runs give the same report.

Univariate scenarios draw a calibration sample and a monitoring stream from the
same generator; from ``onset_index`` on the stream is shifted. Labeled
scenarios (for the interval and spike charts) use the response

    y = SLOPE * x + noise,

with in-control inputs ``x ~ U(0, 1)``. For ``noise_shift`` the model
development data also covers ``x`` in ``[1, 2)``, where the noise is multiplied by
the shift factor, and after onset the stream's inputs move into that region.
The mean response stays on the model there; only the noise grows.

Default scenario parameters (sizes, shift magnitudes, onset) are
reconstructions, not published values.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from . import calibration as cal
from .charts import conformal_interval_chart, conformal_score_chart, first_flag, shewhart_chart, uncertainty_spike_chart
from .core import Signal, labeled_points
from .scores import KNNRegressor, LeastSquaresLine, fit_individual, fit_model_residual, fit_normalized_residual

RNG_ALGORITHM = "PCG64"
SLOPE = 2.0
REGIME_BOUNDARY = 1.0

MEAN_SHIFT = "mean_shift"
SCALE_SHIFT = "scale_shift"
NOISE_SHIFT = "noise_shift"


@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0
    kind = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def mean(self) -> float:
        return self.mu

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.normal(self.mu, self.sigma, n)


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)


@dataclass(frozen=True)
class Bimodal:
    """Two-component normal mixture; ``weight`` is the probability of the first mode."""

    mu1: float = -3.0
    mu2: float = 3.0
    sigma: float = 1.0
    weight: float = 0.5
    kind = "bimodal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not 0 < self.weight < 1:
            raise ValueError("weight must lie in (0, 1)")

    @property
    def mean(self) -> float:
        return self.weight * self.mu1 + (1 - self.weight) * self.mu2

    def draw(self, rng, n):
        first = rng.random(n) < self.weight
        noise = rng.normal(0.0, self.sigma, n)
        return np.where(first, self.mu1, self.mu2) + noise


Generator = Union[Normal, Exponential, Bimodal]
GENERATORS = {"normal": Normal, "exponential": Exponential, "bimodal": Bimodal}


@dataclass(frozen=True)
class Shift:
    kind: str
    magnitude: float
    onset_index: int

    def __post_init__(self):
        if self.kind not in (MEAN_SHIFT, SCALE_SHIFT, NOISE_SHIFT):
            raise ValueError(f"unknown shift kind {self.kind!r}")
        if self.kind != MEAN_SHIFT and not self.magnitude > 0:
            raise ValueError("shift factor must be positive")


@dataclass(frozen=True)
class SimulationSpec:
    generator: Generator = field(default_factory=Normal)
    n_calibration: int = 1000
    n_stream: int = 200
    shift: Optional[Shift] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_calibration < 1 or self.n_stream < 0:
            raise ValueError("invalid sample sizes")
        if self.shift is not None and not 0 <= self.shift.onset_index <= self.n_stream:
            raise ValueError("onset_index outside stream")

    @property
    def onset(self) -> int:
        return self.n_stream if self.shift is None else self.shift.onset_index

    def rng(self, repetition: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, repetition])

    def describe(self) -> dict:
        d = asdict(self)
        d["generator"] = {"kind": self.generator.kind, **asdict(self.generator)}
        d["rng"] = RNG_ALGORITHM
        return d


def generate(spec: SimulationSpec, repetition: int = 0):
    """Calibration sample and monitoring stream as float arrays."""
    rng = spec.rng(repetition)
    g = spec.generator
    calib = g.draw(rng, spec.n_calibration)
    stream = g.draw(rng, spec.n_stream)
    shift = spec.shift
    if shift is not None:
        tail = stream[shift.onset_index:]
        if shift.kind == MEAN_SHIFT:
            tail += shift.magnitude
        elif shift.kind == SCALE_SHIFT:
            tail[:] = g.mean + shift.magnitude * (tail - g.mean)
        else:
            raise ValueError("noise_shift needs a labeled scenario; use generate_labeled")
    return calib, stream


def generate_labeled(spec: SimulationSpec, n_train: int = 1000, repetition: int = 0):
    """Model-development, calibration and stream sets of labeled points."""
    rng = spec.rng(repetition)
    g = spec.generator
    shift = spec.shift
    noisy = shift is not None and shift.kind == NOISE_SHIFT
    factor = shift.magnitude if noisy else 1.0

    def response(x):
        noise = g.draw(rng, x.size) - g.mean
        noise = np.where(x >= REGIME_BOUNDARY, factor * noise, noise)
        return SLOPE * x + noise

    x_train = rng.uniform(0.0, 2 * REGIME_BOUNDARY if noisy else REGIME_BOUNDARY, n_train)
    y_train = response(x_train)
    x_cal = rng.uniform(0.0, REGIME_BOUNDARY, spec.n_calibration)
    y_cal = response(x_cal)
    x_stream = rng.uniform(0.0, REGIME_BOUNDARY, spec.n_stream)
    onset = spec.onset
    if noisy:
        x_stream[onset:] += REGIME_BOUNDARY
    y_stream = response(x_stream)
    if shift is not None and shift.kind == MEAN_SHIFT:
        y_stream[onset:] += shift.magnitude
    elif shift is not None and shift.kind == SCALE_SHIFT:
        resid = y_stream[onset:] - SLOPE * x_stream[onset:]
        y_stream[onset:] = SLOPE * x_stream[onset:] + shift.magnitude * resid
    return (labeled_points(x_train, y_train), labeled_points(x_cal, y_cal),
            labeled_points(x_stream, y_stream))


@dataclass(frozen=True)
class RunOutcome:
    repetition: int
    chart: str
    pre_alarms: int
    pre_points: int
    post_alarms: int
    post_points: int
    first_detection_index: Optional[int]

    @property
    def pre_shift_alarm_rate(self) -> Optional[float]:
        return self.pre_alarms / self.pre_points if self.pre_points else None

    @property
    def post_shift_detection_rate(self) -> Optional[float]:
        return self.post_alarms / self.post_points if self.post_points else None


def summarize_flags(flags: np.ndarray, onset: int, repetition: int, chart: str) -> RunOutcome:
    flags = np.asarray(flags, dtype=bool)
    post = np.flatnonzero(flags[onset:])
    return RunOutcome(
        repetition=repetition,
        chart=chart,
        pre_alarms=int(flags[:onset].sum()),
        pre_points=int(onset),
        post_alarms=int(post.size),
        post_points=int(flags.size - onset),
        first_detection_index=int(onset + post[0]) if post.size else None,
    )


@dataclass(frozen=True)
class ComparisonReport:
    spec: SimulationSpec
    alpha: float
    outcomes: tuple

    CHARTS = ("shewhart", "conformal")

    def for_chart(self, chart: str) -> list:
        return [o for o in self.outcomes if o.chart == chart]

    @property
    def repetitions(self) -> int:
        return len({o.repetition for o in self.outcomes})

    def pre_shift_alarm_rate(self, chart: str) -> Optional[float]:
        """Pooled over repetitions: total pre-shift alarms / total pre-shift points."""
        runs = self.for_chart(chart)
        pts = sum(o.pre_points for o in runs)
        return sum(o.pre_alarms for o in runs) / pts if pts else None

    def post_shift_detection_rate(self, chart: str) -> Optional[float]:
        runs = self.for_chart(chart)
        pts = sum(o.post_points for o in runs)
        return sum(o.post_alarms for o in runs) / pts if pts else None

    def median_first_detection(self, chart: str) -> Optional[float]:
        """Median first detection index; runs with no detection count as ``n_stream``."""
        runs = self.for_chart(chart)
        if not runs or self.spec.onset >= self.spec.n_stream:
            return None
        idx = [self.spec.n_stream if o.first_detection_index is None else o.first_detection_index
               for o in runs]
        return float(np.median(idx))

    @property
    def total_points(self) -> int:
        return sum(o.pre_points + o.post_points for o in self.for_chart("conformal"))


def run_once(spec: SimulationSpec, alpha: float, repetition: int = 0):
    """One repetition: the Shewhart and conformal score charts on the same data."""
    calib, stream = generate(spec, repetition)
    shew = shewhart_chart(calib, stream)
    scorer = fit_individual(calib)
    model = cal.calibrate(scorer, calib, alpha)
    conf = conformal_score_chart(model, scorer, stream)
    return shew, conf


def compare_charts(spec: SimulationSpec, alpha: float, repetitions: int = 1) -> ComparisonReport:
    if repetitions < 0:
        raise ValueError("repetitions must be non-negative")
    cal.alpha_fraction(alpha)
    outcomes = []
    for r in range(repetitions):
        shew, conf = run_once(spec, alpha, r)
        outcomes.append(summarize_flags(shew.flags(), spec.onset, r, "shewhart"))
        outcomes.append(summarize_flags(conf.flags(), spec.onset, r, "conformal"))
    return ComparisonReport(spec, float(alpha), tuple(outcomes))


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


@dataclass(frozen=True)
class SpikeTiming:
    """First spike and first limit flag (positions at or after onset) per run."""

    onset: int
    n_stream: int
    first_spike: tuple
    first_limit: tuple

    @staticmethod
    def _median(values, n_stream) -> float:
        return float(np.median([n_stream if v is None else v for v in values]))

    @property
    def median_first_spike(self) -> float:
        return self._median(self.first_spike, self.n_stream)

    @property
    def median_first_limit(self) -> float:
        return self._median(self.first_limit, self.n_stream)


def spike_run(spec: SimulationSpec, alpha: float, width_alpha: float = 0.05,
              k: int = 20, n_train: int = 2000, repetition: int = 0):
    train, calib, stream = generate_labeled(spec, n_train, repetition)
    X = np.array([p.x for p in train])
    y = np.array([p.y for p in train])
    model = KNNRegressor.fit(X, y, k)
    scorer = fit_normalized_residual(model)
    cal_model = cal.calibrate(scorer, calib, alpha)
    series = uncertainty_spike_chart(cal_model, model, stream, calib, width_alpha)
    return series


def spike_timing(spec: SimulationSpec, alpha: float, repetitions: int,
                 width_alpha: float = 0.05, k: int = 20, n_train: int = 2000) -> SpikeTiming:
    spikes, limits = [], []
    for r in range(repetitions):
        series = spike_run(spec, alpha, width_alpha, k, n_train, r)
        spikes.append(first_flag(series, Signal.UNCERTAINTY_SPIKE, spec.onset))
        limits.append(first_flag(series, Signal.LIMIT_EXCEEDED, spec.onset))
    return SpikeTiming(spec.onset, spec.n_stream, tuple(spikes), tuple(limits))


def interval_coverage(spec: SimulationSpec, alpha: float, repetitions: int,
                      n_train: int = 200) -> tuple:
    """(covered, total) for least-squares conformal intervals on in-control pairs."""
    covered = total = 0
    for r in range(repetitions):
        train, calib, stream = generate_labeled(spec, n_train, r)
        X = np.array([p.x for p in train])
        y = np.array([p.y for p in train])
        line = LeastSquaresLine.fit(X, y)
        model = cal.calibrate(fit_model_residual(line), calib, alpha)
        flags = conformal_interval_chart(model, line, stream).flags()
        covered += int((~flags).sum())
        total += flags.size
    return covered, total


# Reconstructed scenarios for the reproduction scripts and the CLI defaults.
PRESET_NORMAL = SimulationSpec(Normal(0.0, 1.0), 1000, 200, Shift(MEAN_SHIFT, 2.0, 100), seed=1)
PRESET_EXPONENTIAL = SimulationSpec(Exponential(1.0), 1000, 200, Shift(MEAN_SHIFT, 2.0, 100), seed=2)
PRESET_SPIKE = SimulationSpec(Normal(0.0, 1.0), 500, 200, Shift(NOISE_SHIFT, 4.0, 100), seed=3)
