"""The sliding-window detection engine.

Detection runs in three steps: lay overlapping windows over the image
(one grid per configured window size), classify every window and keep
those whose winning class is a real target with probability above its
calibrated acceptance threshold, then suppress overlapping survivors so
each object is reported once.

``SlidingWindowDetector`` wraps the pipeline in a scikit-learn style
estimator: ``fit`` learns window sizes from training boxes, ``calibrate``
(or the ``thresholds`` parameter) supplies per-class acceptance
thresholds, and ``predict`` maps scenes to detection lists.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Mapping, Sequence

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_fraction, check_positive_int
from .backends import ClassifierBackend
from .boxes import BoundingBox
from .calibration import CalibrationStats, calibrate_threshold, threshold_value
from .chips import extract_chip
from .dataset import AnnotatedScene
from .errors import BackendError, ConfigError
from .metrics import f1, match_detections, precision_recall
from .nms import Detection, ScoredWindow, nms
from .taxonomy import ClassLabel
from .windows import WindowGrid, generate_windows, window_sizes_from_boxes

log = logging.getLogger("sweepdet.detector")

DEFAULT_BATCH_SIZE = 64


def _resolve_thresholds(backend: ClassifierBackend, thresholds: Mapping
                        ) -> dict[int, float]:
    """Normalize a threshold mapping to {class_id: float} and verify that
    every non-background class of the backend taxonomy is covered."""
    taxonomy = backend.taxonomy()
    if not taxonomy.has_false_detection:
        raise ConfigError("backend taxonomy must include the False Detection class")
    resolved: dict[int, float] = {}
    for key, value in thresholds.items():
        if isinstance(key, ClassLabel):
            class_id = key.id
        elif isinstance(key, str):
            class_id = taxonomy.by_name(key).id
        else:
            class_id = int(key)
        resolved[class_id] = threshold_value(value)

    fd_id = taxonomy.false_detection.id
    missing = [lab.name for lab in taxonomy
               if lab.id != fd_id and lab.id not in resolved]
    if missing:
        raise ConfigError(
            "no acceptance threshold for class(es): " + ", ".join(sorted(missing)))
    return resolved


def _chip_batches(scene: AnnotatedScene, windows: Sequence[BoundingBox],
                  chip_size: int, batch_size: int):
    for start in range(0, len(windows), batch_size):
        yield [extract_chip(scene, box, chip_size)
               for box in windows[start:start + batch_size]]


def score_windows(scene: AnnotatedScene, grids: Iterable[WindowGrid],
                  backend: ClassifierBackend, thresholds: Mapping,
                  batch_size: int = DEFAULT_BATCH_SIZE,
                  n_jobs: int = 1) -> list[ScoredWindow]:
    """Classify every window and keep confident non-background ones.

    A window survives when its winning class is not False Detection and
    its winning probability reaches that class's threshold. Output order
    is deterministic: (scale_index, y, x), regardless of n_jobs; batches
    are re-merged in submission order, and single-consumer backends are
    scored sequentially.
    """
    check_positive_int("batch_size", batch_size)
    check_positive_int("n_jobs", n_jobs)
    taxonomy = backend.taxonomy()
    accept = _resolve_thresholds(backend, thresholds)
    fd_id = taxonomy.false_detection.id

    grids = list(grids)
    scored: list[ScoredWindow] = []
    windows_classified = 0
    for scale_index, grid in enumerate(grids):
        batches = list(_chip_batches(scene, grid.windows, backend.chip_size,
                                     batch_size))
        prob_batches = []
        try:
            if n_jobs > 1 and not backend.single_consumer and len(batches) > 1:
                with ThreadPoolExecutor(max_workers=n_jobs) as pool:
                    for probs in pool.map(backend.classify_batch, batches):
                        prob_batches.append(probs)
                        windows_classified += len(probs)
            else:
                for batch in batches:
                    probs = backend.classify_batch(batch)
                    prob_batches.append(probs)
                    windows_classified += len(probs)
        except BackendError as exc:
            # Callers can resume or report progress from this count.
            exc.windows_scored = windows_classified
            raise

        position = 0
        for batch, probs in zip(batches, prob_batches):
            if len(probs) != len(batch):
                raise ConfigError(
                    f"backend returned {len(probs)} vectors for a batch of "
                    f"{len(batch)} chips")
            for vec in probs:
                box = grid.windows[position]
                position += 1
                best_class, best_prob = taxonomy.argmax(vec)
                if best_class.id == fd_id:
                    continue
                if best_prob < accept[best_class.id]:
                    continue
                scored.append(ScoredWindow(box=box, probs=vec,
                                           best_class=best_class,
                                           best_prob=best_prob,
                                           scale_index=scale_index))
    # Window generation already walks (scale, y, x); the sort makes the
    # contract explicit and independent of generation order.
    scored.sort(key=lambda s: (s.scale_index, s.box.y_min, s.box.x_min))
    return scored


def detect(scene: AnnotatedScene, backend: ClassifierBackend, *,
           window_sizes: Sequence[int], thresholds: Mapping,
           overlap: float = 0.5, nms_iou: float = 0.3,
           per_class_nms: bool = False, batch_size: int = DEFAULT_BATCH_SIZE,
           n_jobs: int = 1) -> list[Detection]:
    """Run the full three-step pipeline on one scene.

    One grid is generated per window size (a multi-size run is simply
    several passes), all grids are scored and pooled, and suppression runs
    once over the pooled candidates. Deterministic end to end.
    """
    if not window_sizes:
        raise ConfigError("at least one window size is required")
    check_fraction("overlap", overlap, 0.0, 1.0, inclusive_high=False)
    grids = [generate_windows(scene.width, scene.height, size, overlap)
             for size in window_sizes]
    candidates = score_windows(scene, grids, backend, thresholds,
                               batch_size=batch_size, n_jobs=n_jobs)
    return nms(candidates, iou_threshold=nms_iou, per_class=per_class_nms)


class SlidingWindowDetector(BaseEstimator):
    """Sliding-window detector with a scikit-learn estimator surface.

    Parameters
    ----------
    backend : ClassifierBackend
        Pluggable classifier scoring each window.
    window_scheme : {"mean", "mean_and_p75"}, default "mean_and_p75"
        How ``fit`` derives window sizes from training boxes. Ignored when
        ``window_sizes`` is given explicitly.
    window_sizes : sequence of int, optional
        Explicit window sizes; skips size estimation in ``fit``.
    thresholds : mapping, optional
        Per-class acceptance thresholds (class, name or id ->
        CalibrationStats or float). Alternatively call ``calibrate``.
    overlap : float, default 0.5
        Fractional overlap between adjacent windows, in [0, 1).
    nms_iou : float, default 0.3
        Suppression IoU threshold, in (0, 1].
    per_class_nms : bool, default False
        Suppress only within a class instead of across classes.
    batch_size : int, default 64
        Chips per classifier call.
    n_jobs : int, default 1
        Worker threads for window scoring; results are merged back into
        deterministic order, so the output never depends on this.
    """

    def __init__(self, backend: ClassifierBackend | None = None,
                 window_scheme: str = "mean_and_p75",
                 window_sizes: Sequence[int] | None = None,
                 thresholds: Mapping | None = None,
                 overlap: float = 0.5, nms_iou: float = 0.3,
                 per_class_nms: bool = False,
                 batch_size: int = DEFAULT_BATCH_SIZE, n_jobs: int = 1):
        self.backend = backend
        self.window_scheme = window_scheme
        self.window_sizes = window_sizes
        self.thresholds = thresholds
        self.overlap = overlap
        self.nms_iou = nms_iou
        self.per_class_nms = per_class_nms
        self.batch_size = batch_size
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        """Learn window sizes from training data.

        X is either a list of BoundingBox or a list of AnnotatedScene
        (their ground-truth boxes are pooled). y is ignored.
        """
        boxes: list[BoundingBox] = []
        for item in X:
            if isinstance(item, AnnotatedScene):
                boxes.extend(box for box, _ in item.boxes)
            elif isinstance(item, BoundingBox):
                boxes.append(item)
            else:
                raise TypeError(
                    "fit expects BoundingBox or AnnotatedScene elements, "
                    f"got {type(item).__name__}")
        if self.window_sizes is not None:
            self.window_sizes_ = [check_positive_int("window size", s)
                                  for s in self.window_sizes]
        else:
            self.window_sizes_ = window_sizes_from_boxes(boxes, self.window_scheme)
        if self.thresholds is not None:
            self.thresholds_ = dict(self.thresholds)
        return self

    def calibrate(self, validation_probs: Mapping[str, Sequence[float]]):
        """Derive per-class acceptance thresholds from validation runs.

        ``validation_probs`` maps class (name, id or ClassLabel) to the
        winning-class probabilities of its correctly classified validation
        examples.
        """
        self.thresholds_ = {key: calibrate_threshold(probs)
                            for key, probs in validation_probs.items()}
        return self

    def calibration_stats(self) -> dict:
        self._check_fitted(require_sizes=False)
        return {key: value for key, value in self.thresholds_.items()
                if isinstance(value, CalibrationStats)}

    def _check_fitted(self, require_sizes: bool = True):
        if self.backend is None:
            raise ConfigError("a classifier backend is required")
        if require_sizes and not hasattr(self, "window_sizes_"):
            if self.window_sizes is not None:
                self.window_sizes_ = [check_positive_int("window size", s)
                                      for s in self.window_sizes]
            else:
                raise NotFittedError(
                    "call fit() or pass explicit window_sizes before predicting")
        if not hasattr(self, "thresholds_"):
            if self.thresholds is not None:
                self.thresholds_ = dict(self.thresholds)
            else:
                raise NotFittedError(
                    "call calibrate() or pass thresholds before predicting")

    def detect_scene(self, scene: AnnotatedScene) -> list[Detection]:
        """Detections for a single scene."""
        self._check_fitted()
        return detect(scene, self.backend, window_sizes=self.window_sizes_,
                      thresholds=self.thresholds_, overlap=self.overlap,
                      nms_iou=self.nms_iou, per_class_nms=self.per_class_nms,
                      batch_size=self.batch_size, n_jobs=self.n_jobs)

    def predict(self, X) -> list[list[Detection]]:
        """Detections for each scene in X (a list of AnnotatedScene)."""
        if isinstance(X, AnnotatedScene):
            raise TypeError("predict expects a list of scenes; "
                            "use detect_scene for a single one")
        return [self.detect_scene(scene) for scene in X]

    def score(self, X, y=None, match_iou: float = 0.5) -> float:
        """Aggregate detection F1 against the scenes' own ground truth."""
        counts = None
        for scene, detections in zip(X, self.predict(X)):
            result = match_detections(detections, scene.boxes, iou_min=match_iou)
            counts = result.counts if counts is None else counts + result.counts
        if counts is None:
            raise ValueError("score requires at least one scene")
        return f1(*precision_recall(counts))
