"""Dataset assembly: scenes, background sampling, splitting and balancing.

The training corpus is built from annotated scenes in four moves: sample a
synthesized "False Detection" background class away from real targets,
stratify-split every class 80/20 (by default), cap runaway classes, and
derive inverse-frequency class weights.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from ._validation import check_fraction, check_image, check_positive_int
from .boxes import BoundingBox, clamp_box, iou
from .geojson_io import AnnotationRecord
from .taxonomy import ClassLabel

log = logging.getLogger("sweepdet.dataset")

# A sampled background box is rejected when it overlaps any real target
# more than incidentally; 0.1 tolerates fringe contact only.
FALSE_DETECTION_MAX_IOU = 0.1

# Give up once this many consecutive samples in a row were rejected,
# expressed as a multiple of the requested count.
SATURATION_FACTOR = 10


@dataclass
class AnnotatedScene:
    """A raster plus its ground-truth boxes, clamped to the raster bounds."""

    image_id: str
    pixels: np.ndarray = field(repr=False)
    boxes: list[tuple[BoundingBox, ClassLabel]] = field(default_factory=list)

    def __post_init__(self):
        self.pixels = check_image(self.pixels)
        clamped = []
        for box, label in self.boxes:
            kept = clamp_box(box, self.width, self.height)
            if kept is None:
                log.warning("scene %s: dropping box %s entirely outside bounds",
                            self.image_id, box)
                continue
            clamped.append((kept, label))
        self.boxes = clamped

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_records(cls, image_id: str, pixels: np.ndarray,
                     records: Sequence[AnnotationRecord]) -> "AnnotatedScene":
        boxes = [(rec.box, rec.label) for rec in records if rec.image_id == image_id]
        return cls(image_id=image_id, pixels=pixels, boxes=boxes)


def load_scene(path, image_id: str | None = None,
               records: Sequence[AnnotationRecord] = ()) -> AnnotatedScene:
    """Load a TIFF/PNG raster as an 8-bit RGB scene."""
    path = Path(path)
    with Image.open(path) as img:
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return AnnotatedScene.from_records(image_id or path.name, pixels, records)


def sample_false_detections(scene: AnnotatedScene, count: int, box_size: int,
                            seed: int = 0) -> tuple[list[BoundingBox], bool]:
    """Draw background boxes at uniformly random in-bounds positions.

    Boxes overlapping any ground-truth box with IoU above
    FALSE_DETECTION_MAX_IOU are rejected and resampled. Returns the
    accepted boxes plus a saturation flag that is True when
    SATURATION_FACTOR * count consecutive rejections forced an early stop.
    """
    check_positive_int("count", count)
    check_positive_int("box_size", box_size)
    if box_size > min(scene.width, scene.height):
        raise ValueError(
            f"box_size {box_size} exceeds scene extent "
            f"{scene.width}x{scene.height}")

    rng = np.random.default_rng(seed)
    accepted: list[BoundingBox] = []
    consecutive_rejections = 0
    limit = SATURATION_FACTOR * count
    while len(accepted) < count:
        x = int(rng.integers(0, scene.width - box_size + 1))
        y = int(rng.integers(0, scene.height - box_size + 1))
        candidate = BoundingBox(x, y, x + box_size, y + box_size)
        if any(iou(candidate, gt) > FALSE_DETECTION_MAX_IOU for gt, _ in scene.boxes):
            consecutive_rejections += 1
            if consecutive_rejections >= limit:
                return accepted, True
            continue
        consecutive_rejections = 0
        accepted.append(candidate)
    return accepted, False


def _default_label_of(record):
    if isinstance(record, AnnotationRecord):
        return record.label
    if isinstance(record, tuple):
        return record[-1]
    return record.label


def split_dataset(records: Sequence, ratio: float, seed: int = 0,
                  label_of: Callable | None = None) -> tuple[list, list]:
    """Per-class stratified split into (train, validation).

    Each class contributes floor(ratio * n) records to train and the rest
    to validation; a class with a single record places it in train. The
    shuffle is seeded, so reruns are byte-identical.
    """
    if not records:
        raise ValueError("records must be non-empty")
    check_fraction("ratio", ratio, 0.0, 1.0, inclusive_low=False, inclusive_high=False)
    label_of = label_of or _default_label_of

    by_class: dict[ClassLabel, list] = {}
    for rec in records:
        by_class.setdefault(label_of(rec), []).append(rec)

    rng = np.random.default_rng(seed)
    train: list = []
    validation: list = []
    for label in sorted(by_class, key=lambda lab: lab.id):
        group = by_class[label]
        if len(group) == 1:
            train.extend(group)
            continue
        order = rng.permutation(len(group))
        n_train = int(np.floor(ratio * len(group)))
        train.extend(group[i] for i in order[:n_train])
        validation.extend(group[i] for i in order[n_train:])
    return train, validation


def cap_and_weight(train: Sequence, cap: int, seed: int = 0,
                   label_of: Callable | None = None
                   ) -> tuple[list, dict[ClassLabel, float]]:
    """Cap per-class training counts and derive balancing weights.

    Classes above ``cap`` are uniformly subsampled (seeded). The weight of
    class c is N_max / N_c over post-cap counts, so the most numerous
    class always weighs exactly 1.0 and rarer classes weigh more.
    """
    if not train:
        raise ValueError("train set must be non-empty")
    check_positive_int("cap", cap)
    label_of = label_of or _default_label_of

    by_class: dict[ClassLabel, list] = {}
    for rec in train:
        by_class.setdefault(label_of(rec), []).append(rec)

    rng = np.random.default_rng(seed)
    capped: list = []
    counts: dict[ClassLabel, int] = {}
    for label in sorted(by_class, key=lambda lab: lab.id):
        group = by_class[label]
        if len(group) > cap:
            keep = rng.choice(len(group), size=cap, replace=False)
            group = [group[i] for i in sorted(keep)]
        capped.extend(group)
        counts[label] = len(group)

    n_max = max(counts.values())
    weights = {label: n_max / n for label, n in counts.items()}
    return capped, weights
