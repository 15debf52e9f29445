"""Classifier backend contract and deterministic reference backends.

Any classifier can be plugged into the detector as long as it satisfies
this contract: classify a batch of chips into per-class probability
vectors aligned to its taxonomy, deterministically, preserving order and
length. The two reference backends here need no training and make the
full pipeline verifiable at desk scale: one scores chips purely from
ground-truth geometry, the other from mean pixel intensity.
"""

from __future__ import annotations

import abc
from typing import Iterable, Mapping, Sequence

import numpy as np

from .boxes import iou
from .chips import Chip
from .dataset import AnnotatedScene
from .taxonomy import (FALSE_DETECTION_ID, FALSE_DETECTION_NAME, ClassLabel,
                       Taxonomy)

ORACLE_HIT_PROB = 0.99
PIXEL_STAT_MATCH_PROB = 0.95


class ClassifierBackend(abc.ABC):
    """Behavioral contract for pluggable classifiers.

    Implementations must be deterministic at inference time and stateless
    across batches: classify_batch(A + B) == classify_batch(A) +
    classify_batch(B).
    """

    #: chip side length this backend expects, in pixels
    chip_size: int = 64
    #: True when the backend tolerates only one in-flight consumer
    single_consumer: bool = False

    @abc.abstractmethod
    def taxonomy(self) -> Taxonomy:
        """Class labels aligned to the probability vectors."""

    @abc.abstractmethod
    def classify_batch(self, chips: Sequence[Chip]) -> list[np.ndarray]:
        """Probability vectors for ``chips``, same order and length."""


def _spread(taxonomy: Taxonomy, winner: ClassLabel, top: float) -> np.ndarray:
    """Probability vector with ``top`` on the winner, remainder uniform."""
    k = len(taxonomy)
    probs = np.full(k, (1.0 - top) / (k - 1) if k > 1 else 0.0, dtype=np.float64)
    probs[taxonomy.index_of(winner)] = top if k > 1 else 1.0
    return probs


class OracleBackend(ClassifierBackend):
    """Scores chips from ground-truth geometry alone.

    A chip whose source window reaches IoU >= iou_hit with some
    ground-truth box gets probability 0.99 for that box's class (the box
    of largest IoU wins); everything else is a False Detection. Chips must
    carry their source geometry and image id.
    """

    def __init__(self, ground_truth: Iterable[AnnotatedScene] | Mapping[str, list],
                 iou_hit: float = 0.5, taxonomy: Taxonomy | None = None,
                 chip_size: int = 64):
        if not 0.0 < iou_hit <= 1.0:
            raise ValueError(f"iou_hit must lie in (0, 1], got {iou_hit}")
        if isinstance(ground_truth, Mapping):
            self._truth = {str(k): list(v) for k, v in ground_truth.items()}
        else:
            self._truth = {scene.image_id: list(scene.boxes) for scene in ground_truth}
        self.iou_hit = float(iou_hit)
        self.chip_size = int(chip_size)
        self._taxonomy = taxonomy or self._derive_taxonomy()
        if not self._taxonomy.has_false_detection:
            raise ValueError("oracle taxonomy must include the False Detection class")

    def _derive_taxonomy(self) -> Taxonomy:
        labels = {label for boxes in self._truth.values() for _, label in boxes}
        fd = ClassLabel(FALSE_DETECTION_ID, FALSE_DETECTION_NAME)
        return Taxonomy([fd] + sorted(labels))

    def taxonomy(self) -> Taxonomy:
        return self._taxonomy

    def classify_batch(self, chips: Sequence[Chip]) -> list[np.ndarray]:
        out = []
        for chip in chips:
            if chip.source_box is None or chip.image_id is None:
                raise ValueError(
                    "oracle backend requires chips with source geometry metadata")
            best_label = None
            best_iou = 0.0
            for gt_box, gt_label in self._truth.get(chip.image_id, []):
                overlap = iou(chip.source_box, gt_box)
                better = overlap > best_iou or (
                    overlap == best_iou and best_label is not None
                    and gt_label.id < best_label.id)
                if overlap >= self.iou_hit and better:
                    best_iou = overlap
                    best_label = gt_label
            winner = best_label if best_label is not None \
                else self._taxonomy.false_detection
            out.append(_spread(self._taxonomy, winner, ORACLE_HIT_PROB))
        return out


class PixelStatBackend(ClassifierBackend):
    """Classifies a chip by which intensity interval its pixel mean hits.

    ``intervals`` maps class name to a closed [low, high] mean-intensity
    interval; intervals must be pairwise disjoint. A chip matching no
    interval is a False Detection. Trivially "trainable" by picking
    intervals, which makes it useful for integration tests on synthetic
    imagery.
    """

    def __init__(self, intervals: Mapping[str, tuple[float, float]],
                 taxonomy: Taxonomy | None = None, chip_size: int = 64):
        if not intervals:
            raise ValueError("at least one intensity interval is required")
        spans = []
        for name, (low, high) in intervals.items():
            if low > high:
                raise ValueError(f"interval for {name!r} is empty: [{low}, {high}]")
            spans.append((float(low), float(high), name))
        spans.sort()
        for (_, high_a, name_a), (low_b, _, name_b) in zip(spans, spans[1:]):
            if low_b <= high_a:
                raise ValueError(
                    f"intervals for {name_a!r} and {name_b!r} overlap")

        self.chip_size = int(chip_size)
        if taxonomy is None:
            fd = ClassLabel(FALSE_DETECTION_ID, FALSE_DETECTION_NAME)
            labels = [fd] + [ClassLabel(i + 1, name)
                             for i, name in enumerate(intervals)]
            taxonomy = Taxonomy(labels)
        if not taxonomy.has_false_detection:
            raise ValueError("pixel-stat taxonomy must include False Detection")
        self._taxonomy = taxonomy
        self._spans = [(low, high, taxonomy.by_name(name))
                       for low, high, name in spans]

    def taxonomy(self) -> Taxonomy:
        return self._taxonomy

    def classify_batch(self, chips: Sequence[Chip]) -> list[np.ndarray]:
        out = []
        for chip in chips:
            mean = chip.mean_intensity()
            winner = self._taxonomy.false_detection
            for low, high, label in self._spans:
                if low <= mean <= high:
                    winner = label
                    break
            out.append(_spread(self._taxonomy, winner, PIXEL_STAT_MATCH_PROB))
        return out
