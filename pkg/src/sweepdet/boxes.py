"""Axis-aligned pixel-space bounding boxes and overlap arithmetic.

Coordinates use the image convention: origin top-left, x grows right,
y grows down, and a box spans [x_min, x_max) x [y_min, y_max) so its
width is simply x_max - x_min.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            value = getattr(self, name)
            if int(value) != value:
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"coordinates must be non-negative: {self}")
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError(f"box must have strictly positive area: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min

    @property
    def height(self) -> int:
        return self.y_max - self.y_min

    @property
    def area(self) -> int:
        return self.width * self.height

    @property
    def size(self) -> int:
        """Scalar size of the box: the longer of its two sides."""
        return max(self.width, self.height)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    return inter / float(a.area + b.area - inter)


def clamp_box(box: BoundingBox, width: int, height: int) -> BoundingBox | None:
    """Clamp a box to the [0, width) x [0, height) image rectangle.

    Returns None when the clamped box has no positive area (the box lies
    entirely outside the image).
    """
    x_min = max(0, min(box.x_min, width))
    y_min = max(0, min(box.y_min, height))
    x_max = max(0, min(box.x_max, width))
    y_max = max(0, min(box.y_max, height))
    if x_min >= x_max or y_min >= y_max:
        return None
    return BoundingBox(x_min, y_min, x_max, y_max)
