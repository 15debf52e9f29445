"""Acceptance-threshold calibration.

The detector accepts a window when its winning-class probability clears a
per-class threshold derived from the classifier's validation run: three
standard deviations below the mean of the winning-class probabilities of
correctly classified validation examples, clamped into [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError

SIGMA_MULTIPLIER = 3.0


@dataclass(frozen=True)
class CalibrationStats:
    mu: float
    sigma: float
    threshold: float

    def as_dict(self) -> dict:
        return {"mu": self.mu, "sigma": self.sigma, "threshold": self.threshold}

    @classmethod
    def from_dict(cls, raw: dict) -> "CalibrationStats":
        return cls(mu=float(raw["mu"]), sigma=float(raw["sigma"]),
                   threshold=float(raw["threshold"]))


def calibrate_threshold(validation_probs) -> CalibrationStats:
    """Fit CalibrationStats from winning-class validation probabilities.

    mu is the arithmetic mean, sigma the population standard deviation and
    the threshold clamp(mu - 3 sigma, 0, 1). Raises CalibrationError on an
    empty input and ValueError when any value leaves [0, 1].
    """
    probs = np.asarray(list(validation_probs), dtype=np.float64)
    if probs.size == 0:
        raise CalibrationError("cannot calibrate from an empty probability list")
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise ValueError("validation probabilities must lie in [0, 1]")

    mu = float(probs.mean())
    sigma = float(probs.std())  # population standard deviation (ddof=0)
    threshold = min(1.0, max(0.0, mu - SIGMA_MULTIPLIER * sigma))
    return CalibrationStats(mu=mu, sigma=sigma, threshold=threshold)


def threshold_value(entry) -> float:
    """Accept either CalibrationStats or a bare float as a threshold."""
    if isinstance(entry, CalibrationStats):
        return entry.threshold
    return float(entry)
