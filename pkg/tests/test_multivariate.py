import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conformal_spc import calibration as cal
from conformal_spc.charts import shewhart_chart
from conformal_spc.core import process_vectors
from conformal_spc.multivariate import (
    calibrate_detector,
    monitor,
    train_knn,
    train_mahalanobis,
)


def test_knn_examples():
    det = train_knn(process_vectors([[0, 0], [1, 0], [5, 5]]), k=1)
    assert det.score([1.0, 0.0]) == 0
    det2 = train_knn(process_vectors([[0, 0], [1, 0]]), k=2)
    assert det2.score([0.0, 0.0]) == 0.5
    far = np.array([100.0, 100.0])
    nearest = min(np.linalg.norm(far - t) for t in ([0, 0], [1, 0]))
    assert det2.score(far) >= nearest


def test_knn_errors():
    train = process_vectors([[0, 0], [1, 0]])
    with pytest.raises(ValueError, match="k too large"):
        train_knn(train, k=3)
    det = train_knn(train, k=1)
    with pytest.raises(ValueError, match="dimension mismatch"):
        det.score([1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="dimension mismatch"):
        train_knn([[0, 0], [1, 0, 0]], k=1)


def test_knn_matches_brute_force():
    rng = np.random.default_rng(0)
    train = rng.normal(size=(80, 3))
    queries = rng.normal(size=(20, 3))
    det = train_knn(train, k=5)
    for q, s in zip(queries, det.score_many(queries)):
        d = np.sort(np.linalg.norm(train - q, axis=1))[:5]
        assert s == pytest.approx(d.mean(), rel=1e-12)


def test_mahalanobis_examples():
    rng = np.random.default_rng(1)
    train = rng.normal(size=(500, 2))
    det = train_mahalanobis(train, ridge=1e-12)
    assert det.score(det.mean) == 0


def test_mahalanobis_identity_reduces_to_euclidean():
    # symmetric design with exactly identity sample covariance
    pts = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], dtype=float)
    pts = pts * np.sqrt(3 / 2)
    det = train_mahalanobis(pts, ridge=0.0)
    np.testing.assert_allclose(det.precision, np.eye(2), atol=1e-12)
    v = np.array([3.0, -4.0])
    assert det.score(v) == pytest.approx(5.0)


def test_mahalanobis_correlated_axis_order():
    # independent 2x2 inverse: [[a, b], [b, d]]^-1 = [[d, -b], [-b, a]] / (ad - b^2)
    rng = np.random.default_rng(2)
    cov = np.array([[1.0, 0.9], [0.9, 1.0]])
    train = rng.multivariate_normal([0, 0], cov, size=4000)
    det = train_mahalanobis(train, ridge=1e-12)
    a, b, d = np.cov(train, rowvar=False)[[0, 0, 1], [0, 1, 1]]
    inv = np.array([[d, -b], [-b, a]]) / (a * d - b * b)
    major = det.mean + np.array([1.0, 1.0]) / np.sqrt(2) * 2
    minor = det.mean + np.array([1.0, -1.0]) / np.sqrt(2) * 2
    for v in (major, minor):
        diff = v - det.mean
        assert det.score(v) == pytest.approx(np.sqrt(diff @ inv @ diff), rel=1e-6)
    assert det.score(major) < det.score(minor)


def test_mahalanobis_singular():
    train = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ValueError, match="singular covariance"):
        train_mahalanobis(train, ridge=0.0)
    det = train_mahalanobis(train)  # default ridge rescues it
    assert np.isfinite(det.score([0.5, -0.5]))


def test_calibrate_detector_degenerate():
    train = process_vectors([[1.0, 2.0], [5.0, 5.0]])
    det = train_knn(train, k=1)
    m = calibrate_detector(det, process_vectors([[1.0, 2.0]] * 30), 0.1)
    assert m.q == 0
    assert cal.is_out_of_control(m, det.score([1.0, 2.0 + 1e-9]))


def test_calibrate_detector_oracle():
    class Echo:
        scorer_id = "detector:echo"

        def score_many(self, items):
            return np.asarray(items, dtype=float)

    m = calibrate_detector(Echo(), list(range(1, 20)), 0.05)
    assert m.q == 19


def test_monitor_far_point_minimal_p():
    rng = np.random.default_rng(3)
    train, calib = rng.normal(size=(200, 3)), rng.normal(size=(99, 3))
    det = train_knn(train, k=5)
    m = calibrate_detector(det, calib, 0.05)
    diameter = np.ptp(train, axis=0).max()
    stream = np.vstack([rng.normal(size=(5, 3)), np.full((1, 3), 10 * diameter)])
    series = monitor(det, m, stream)
    assert series.points[-1].value == 1 / 100
    assert series.points[-1].flagged
    for a in (0.01, 0.05, 0.5):
        assert monitor(det, m, stream, a).points[-1].flagged


def test_monitor_composition_law():
    rng = np.random.default_rng(4)
    train, calib, stream = rng.normal(size=(100, 2)), rng.normal(size=(150, 2)), rng.normal(size=(300, 2)) * 1.5
    for det in (train_knn(train, 3), train_mahalanobis(train)):
        m = calibrate_detector(det, calib, 0.1)
        series = monitor(det, m, stream)
        np.testing.assert_array_equal(series.flags(), cal.alarms(m, det.score_many(stream)))


def test_monitor_dimension_mismatch():
    det = train_knn(np.zeros((5, 2)) + np.arange(5)[:, None], 1)
    m = calibrate_detector(det, np.ones((10, 2)), 0.5)
    with pytest.raises(ValueError, match="dimension mismatch"):
        monitor(det, m, np.ones((3, 4)))


def test_monitor_reshuffled_calibration_rate():
    rng = np.random.default_rng(5)
    hits = total = 0
    for _ in range(100):
        train, calib = rng.normal(size=(100, 2)), rng.normal(size=(199, 2))
        det = train_knn(train, 5)
        m = calibrate_detector(det, calib, 0.1)
        stream = rng.normal(size=(100, 2))
        f = monitor(det, m, stream).flags()
        hits += f.sum()
        total += f.size
    assert hits / total <= 0.1 + 3 * np.sqrt(0.09 / total) + 0.01


def correlated_shift_fixture(seed=6):
    rho = 0.95
    cov = np.array([[1.0, rho], [rho, 1.0]])
    rng = np.random.default_rng(seed)
    train = rng.multivariate_normal([0, 0], cov, size=2000)
    calib = rng.multivariate_normal([0, 0], cov, size=999)
    # off the correlation ridge but inside each marginal 3-sigma band
    shifted = np.array([[2.0, -2.0]])
    return train, calib, shifted


def test_correlated_shift_invisible_marginally():
    train, calib, shifted = correlated_shift_fixture()
    for j in range(2):
        z = (shifted[0, j] - train[:, j].mean()) / train[:, j].std(ddof=1)
        assert abs(z) < 3
        assert not shewhart_chart(train[:, j], shifted[:, j]).flags().any()
    det = train_mahalanobis(train)
    m = calibrate_detector(det, calib, 0.01)
    assert det.score(shifted[0]) > m.q
    assert monitor(det, m, shifted).flags().all()


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@settings(max_examples=50)
@given(st.floats(0, 2 * np.pi), arrays(float, (2,), elements=st.floats(-5, 5)))
def test_knn_rotation_invariance(theta, q):
    rng = np.random.default_rng(7)
    train = rng.normal(size=(40, 2))
    R = _rotation(theta)
    a = train_knn(train, 4).score(q)
    b = train_knn(train @ R.T, 4).score(R @ q)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


@settings(max_examples=50)
@given(arrays(float, (2, 2), elements=st.floats(-3, 3)), arrays(float, (2,), elements=st.floats(-10, 10)),
       arrays(float, (2,), elements=st.floats(-4, 4)))
def test_mahalanobis_affine_invariance(A, b, q):
    A = A + 3 * np.eye(2)  # diagonally dominant, well conditioned
    if abs(np.linalg.det(A)) < 0.5:
        return
    rng = np.random.default_rng(8)
    train = rng.normal(size=(300, 2)) @ np.array([[1.0, 0.3], [0.0, 0.8]])
    s1 = train_mahalanobis(train, ridge=1e-10).score(q)
    s2 = train_mahalanobis(train @ A.T + b, ridge=1e-10).score(A @ q + b)
    assert s1 == pytest.approx(s2, rel=1e-6, abs=1e-6)
