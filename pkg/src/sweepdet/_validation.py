"""Input validation helpers used across the public API."""

from __future__ import annotations

import numpy as np

PROB_SUM_TOL = 1e-6


def check_fraction(name: str, value: float, low: float = 0.0, high: float = 1.0,
                   inclusive_low: bool = True, inclusive_high: bool = True) -> float:
    value = float(value)
    ok_low = value >= low if inclusive_low else value > low
    ok_high = value <= high if inclusive_high else value < high
    if not (ok_low and ok_high):
        lo = "[" if inclusive_low else "("
        hi = "]" if inclusive_high else ")"
        raise ValueError(f"{name} must lie in {lo}{low}, {high}{hi}, got {value}")
    return value


def check_positive_int(name: str, value: int) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_probabilities(probs, n_classes: int) -> np.ndarray:
    """Validate a class-probability vector: length, range and unit sum."""
    vec = np.asarray(probs, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != n_classes:
        raise ValueError(
            f"probability vector must have length {n_classes}, got shape {vec.shape}")
    if np.any(vec < 0.0) or np.any(vec > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    total = float(vec.sum())
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities must sum to 1.0 within {PROB_SUM_TOL}, got {total}")
    return vec


def check_image(pixels) -> np.ndarray:
    """Validate an 8-bit 3-channel raster in H x W x 3 layout."""
    arr = np.asarray(pixels)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"image must be H x W x 3, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"image must be uint8, got dtype {arr.dtype}")
    return arr
