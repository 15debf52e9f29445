"""Chip augmentation.

Deterministic mode produces the 8 symmetries of the square (4 rotations,
each optionally mirrored), original first. Randomized mode additionally
jitters each variant with a small shift and rescale, then restores the
original side length.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .chips import Chip

DIHEDRAL_ORDER = 8

# Per-variant jitter magnitudes for randomized mode.
MAX_SHIFT_FRACTION = 0.10
SCALE_RANGE = (0.9, 1.1)


def dihedral_variants(pixels: np.ndarray) -> list[np.ndarray]:
    """The 8 dihedral-group images of a square array, identity first.

    Order: rotations by 0/90/180/270 degrees counterclockwise, then the
    same four followed by a horizontal flip.
    """
    rotations = [np.rot90(pixels, k) for k in range(4)]
    flipped = [np.fliplr(rot) for rot in rotations]
    return [np.ascontiguousarray(v) for v in rotations + flipped]


def _jitter(pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random rescale in SCALE_RANGE plus shift up to +-10% of the side,
    re-cropped/padded back to the original size. Padding is black."""
    side = pixels.shape[0]
    scale = rng.uniform(*SCALE_RANGE)
    new_side = max(1, int(round(side * scale)))
    scaled = np.asarray(
        Image.fromarray(pixels, mode="RGB").resize((new_side, new_side), Image.BILINEAR),
        dtype=np.uint8)

    max_shift = int(round(side * MAX_SHIFT_FRACTION))
    dx = int(rng.integers(-max_shift, max_shift + 1))
    dy = int(rng.integers(-max_shift, max_shift + 1))

    out = np.zeros((side, side, 3), dtype=np.uint8)
    # Paste the scaled image at offset (dx, dy) relative to the canvas origin.
    src_x0 = max(0, -dx)
    src_y0 = max(0, -dy)
    dst_x0 = max(0, dx)
    dst_y0 = max(0, dy)
    copy_w = min(new_side - src_x0, side - dst_x0)
    copy_h = min(new_side - src_y0, side - dst_y0)
    if copy_w > 0 and copy_h > 0:
        out[dst_y0:dst_y0 + copy_h, dst_x0:dst_x0 + copy_w] = \
            scaled[src_y0:src_y0 + copy_h, src_x0:src_x0 + copy_w]
    return out


def augment(chip: Chip, mode: str = "deterministic", seed: int = 0) -> list[Chip]:
    """Expand one chip into its augmentation set.

    mode="deterministic" returns the 8 dihedral variants, original first.
    mode="randomized" applies, per variant, a shift/rescale jitter seeded
    by ``seed``.
    """
    if not chip.is_square:
        raise ValueError("augment requires a square chip")
    if mode not in ("deterministic", "randomized"):
        raise ValueError(f"unknown augmentation mode {mode!r}")

    variants = dihedral_variants(chip.pixels)
    if mode == "randomized":
        rng = np.random.default_rng(seed)
        variants = [_jitter(v, rng) for v in variants]
    return [Chip(pixels=v, image_id=chip.image_id, source_box=chip.source_box)
            for v in variants]
