"""Non-maximal suppression over scored windows.

Greedy suppression sorted by probability: repeatedly accept the most
confident remaining candidate and drop every candidate overlapping it
beyond the IoU threshold, so each object is reported once. Suppression is
class-agnostic by default; per-class suppression is available for
experimentation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_fraction
from .boxes import BoundingBox, iou
from .taxonomy import FALSE_DETECTION_NAME, ClassLabel


@dataclass(frozen=True)
class ScoredWindow:
    box: BoundingBox
    probs: np.ndarray = field(repr=False, compare=False)
    best_class: ClassLabel
    best_prob: float
    scale_index: int = 0


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    label: ClassLabel
    prob: float
    scale_index: int = 0


def _priority_key(candidate: ScoredWindow):
    # Highest probability first; ties go to the topmost, then leftmost,
    # then finest-scale candidate so the ordering is fully deterministic.
    return (-candidate.best_prob, candidate.box.y_min, candidate.box.x_min,
            candidate.scale_index, candidate.box.x_max, candidate.box.y_max,
            candidate.best_class.id)


def nms(candidates, iou_threshold: float = 0.3,
        per_class: bool = False) -> list[Detection]:
    """Greedy suppression of overlapping scored windows.

    Candidates are processed in order of decreasing probability (ties:
    smaller y, then smaller x, then smaller scale index). Accepting a
    candidate removes every remaining one whose IoU with it exceeds
    ``iou_threshold``; with per_class=True only same-class candidates
    suppress each other.
    """
    check_fraction("iou_threshold", iou_threshold, 0.0, 1.0, inclusive_low=False)
    ordered = sorted(candidates, key=_priority_key)
    if any(c.best_class.name == FALSE_DETECTION_NAME for c in ordered):
        raise ValueError("nms candidates must not include False Detection windows")
    accepted: list[ScoredWindow] = []
    for candidate in ordered:
        suppressed = any(
            (not per_class or keeper.best_class == candidate.best_class)
            and iou(keeper.box, candidate.box) > iou_threshold
            for keeper in accepted)
        if not suppressed:
            accepted.append(candidate)
    return [Detection(box=c.box, label=c.best_class, prob=c.best_prob,
                      scale_index=c.scale_index) for c in accepted]
