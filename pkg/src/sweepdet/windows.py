"""Sliding-window generation.

Window sizes are derived from the training-set bounding boxes (mean size,
optionally joined by the 75th percentile for classes with a wide size
range), and windows are laid out on an overlapping grid whose last
row/column snaps to the image edge so the whole raster is covered without
fabricating pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_fraction, check_positive_int
from .boxes import BoundingBox

WINDOW_SCHEMES = ("mean", "mean_and_p75")


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def window_sizes_from_boxes(train_boxes, scheme: str = "mean_and_p75") -> list[int]:
    """Window sizes for a detection run, derived from training boxes.

    The size of a box is its longer side. "mean" yields the rounded mean
    size; "mean_and_p75" adds the 75th percentile (linear interpolation
    between order statistics). Duplicates collapse; rounding is half-up.
    """
    boxes = list(train_boxes)
    if not boxes:
        raise ValueError("train_boxes must be non-empty")
    if scheme not in WINDOW_SCHEMES:
        raise ValueError(f"scheme must be one of {WINDOW_SCHEMES}, got {scheme!r}")

    sizes = np.array([box.size for box in boxes], dtype=np.float64)
    out = [_round_half_up(float(sizes.mean()))]
    if scheme == "mean_and_p75":
        p75 = float(np.percentile(sizes, 75, method="linear"))
        out.append(_round_half_up(p75))

    unique: list[int] = []
    for size in out:
        if size not in unique:
            unique.append(size)
    return unique


@dataclass
class WindowGrid:
    window_size: int
    stride: int
    windows: list[BoundingBox] = field(repr=False)

    def __len__(self) -> int:
        return len(self.windows)


def _axis_positions(extent: int, window: int, stride: int) -> list[int]:
    if window >= extent:
        return [0]
    positions = list(range(0, extent - window + 1, stride))
    if positions[-1] + window < extent:
        positions.append(extent - window)  # snap the final window to the edge
    return positions


def generate_windows(image_width: int, image_height: int, window_size: int,
                     overlap: float = 0.5) -> WindowGrid:
    """Overlapping window grid covering the full image rectangle.

    stride = max(1, floor(window_size * (1 - overlap))). Windows start at
    multiples of the stride; a final row/column is snapped to the image
    edge whenever the last regular window falls short of it. A window
    larger than an image dimension is clamped to that dimension.
    """
    check_positive_int("image_width", image_width)
    check_positive_int("image_height", image_height)
    check_positive_int("window_size", window_size)
    check_fraction("overlap", overlap, 0.0, 1.0, inclusive_high=False)

    stride = max(1, int(math.floor(window_size * (1.0 - overlap))))
    width = min(window_size, image_width)
    height = min(window_size, image_height)

    windows = [
        BoundingBox(x, y, x + width, y + height)
        for y in _axis_positions(image_height, height, stride)
        for x in _axis_positions(image_width, width, stride)
    ]
    return WindowGrid(window_size=window_size, stride=stride, windows=windows)
