import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sweepdet import CalibrationError, calibrate_threshold


def two_pass_mean_sigma(values):
    """Independent two-pass oracle: mean, then population sigma."""
    n = len(values)
    mean = sum(values) / n
    variance = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(variance)


def test_zero_variance():
    stats = calibrate_threshold([0.9, 0.9, 0.9])
    assert stats.mu == 0.9
    assert stats.sigma == 0.0
    assert stats.threshold == 0.9


def test_worked_example():
    # mu 0.9, population sigma sqrt(0.02/3), threshold mu - 3 sigma.
    stats = calibrate_threshold([0.8, 0.9, 1.0])
    assert stats.mu == pytest.approx(0.9, abs=1e-12)
    assert stats.sigma == pytest.approx(math.sqrt(0.02 / 3), abs=1e-12)
    assert stats.threshold == pytest.approx(0.65505, abs=1e-5)


def test_clamped_to_zero():
    stats = calibrate_threshold([0.5, 0.1])
    assert stats.mu == pytest.approx(0.3)
    assert stats.sigma == pytest.approx(0.2)
    assert stats.threshold == 0.0


def test_empty_list_is_calibration_error():
    with pytest.raises(CalibrationError):
        calibrate_threshold([])


def test_out_of_range_rejected():
    with pytest.raises(ValueError):
        calibrate_threshold([0.5, 1.2])
    with pytest.raises(ValueError):
        calibrate_threshold([-0.1, 0.5])


def test_matches_two_pass_oracle_on_seeded_inputs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        values = rng.uniform(0.0, 1.0, size=int(rng.integers(1, 60))).tolist()
        stats = calibrate_threshold(values)
        mean, sigma = two_pass_mean_sigma(values)
        assert abs(stats.mu - mean) <= 1e-12
        assert abs(stats.sigma - sigma) <= 1e-12
        expected = min(1.0, max(0.0, mean - 3.0 * sigma))
        assert abs(stats.threshold - expected) <= 1e-12


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40))
def test_threshold_always_clamped(values):
    stats = calibrate_threshold(values)
    assert 0.0 <= stats.threshold <= 1.0
    assert stats.sigma >= 0.0
