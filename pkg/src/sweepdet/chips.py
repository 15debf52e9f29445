"""Fixed-size pixel patches cut from scenes.

A chip is the classifier's input unit. It remembers where it came from
(source image id and box) so geometry-aware reference backends can score
it without ever looking at the pixels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from ._validation import check_image, check_positive_int
from .boxes import BoundingBox, clamp_box


@dataclass
class Chip:
    pixels: np.ndarray = field(repr=False)
    image_id: str | None = None
    source_box: BoundingBox | None = None

    def __post_init__(self):
        self.pixels = check_image(self.pixels)

    @property
    def side(self) -> int:
        return self.pixels.shape[0]

    @property
    def is_square(self) -> bool:
        return self.pixels.shape[0] == self.pixels.shape[1]

    def mean_intensity(self) -> float:
        return float(self.pixels.mean())


def resize_pixels(pixels: np.ndarray, out_size: int) -> np.ndarray:
    """Bilinear resize to out_size x out_size; identity crops are not resampled."""
    if pixels.shape[0] == out_size and pixels.shape[1] == out_size:
        return pixels.copy()
    img = Image.fromarray(pixels, mode="RGB")
    resized = img.resize((out_size, out_size), Image.BILINEAR)
    return np.asarray(resized, dtype=np.uint8)


def extract_chip(scene, box: BoundingBox, out_size: int) -> Chip:
    """Crop ``box`` from ``scene`` (clamped to its bounds) and resize.

    The scene only needs ``pixels`` and ``image_id`` attributes; ground
    truth is irrelevant here. Raises ValueError when the box lies entirely
    outside the scene.
    """
    check_positive_int("out_size", out_size)
    pixels = check_image(scene.pixels)
    height, width = pixels.shape[:2]
    clamped = clamp_box(box, width, height)
    if clamped is None:
        raise ValueError(f"box {box} lies entirely outside the {width}x{height} scene")
    crop = pixels[clamped.y_min:clamped.y_max, clamped.x_min:clamped.x_max]
    return Chip(pixels=resize_pixels(crop, out_size),
                image_id=getattr(scene, "image_id", None),
                source_box=box)
