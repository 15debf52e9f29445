"""Detection-run evaluation against ground truth.

Counts are accumulated per class with one-to-one same-class matching; a
second, class-agnostic matching pass supplies (true, predicted) pairs for
the confusion view, which is where cross-class mix-ups (a detector calling
one vehicle type another) become visible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .boxes import BoundingBox
from .metrics import (ConfusionMatrix, CountTable, MetricsReport,
                      match_detections, merge_counts, render_count_table)
from .nms import Detection
from .taxonomy import ClassLabel, Taxonomy


@dataclass
class EvaluationResult:
    per_class: dict[str, CountTable]
    aggregate: CountTable
    confusion: ConfusionMatrix
    match_iou: float

    @property
    def aggregate_report(self) -> MetricsReport:
        return MetricsReport.from_counts(self.aggregate)

    def class_report(self, name: str) -> MetricsReport:
        return MetricsReport.from_counts(self.per_class[name])

    def as_dict(self) -> dict:
        return {
            "match_iou": self.match_iou,
            "aggregate": self.aggregate_report.as_dict(),
            "per_class": {name: self.class_report(name).as_dict()
                          for name in sorted(self.per_class)},
            "confusion_matrix": {
                "classes": self.confusion.taxonomy.names,
                "counts": self.confusion.matrix.tolist(),
            },
        }

    def render_text(self) -> str:
        blocks = [render_count_table(self.aggregate_report,
                                     title="All classes")]
        for name in sorted(self.per_class):
            blocks.append(render_count_table(self.class_report(name),
                                             title=name))
        return "\n".join(blocks)


def _check_taxonomy(items, taxonomy: Taxonomy, what: str):
    for label in items:
        if label not in taxonomy:
            raise ValueError(
                f"{what} uses class {label.name!r} (id {label.id}) "
                f"that is not in the evaluation taxonomy")


def evaluate_detections(
        detections_by_image: Mapping[str, Sequence[Detection]],
        truth_by_image: Mapping[str, Sequence[tuple[BoundingBox, ClassLabel]]],
        taxonomy: Taxonomy, match_iou: float = 0.5) -> EvaluationResult:
    """Per-class and aggregate counts plus a cross-class confusion matrix.

    Count tables merge associatively across images, so scenes may be
    evaluated in any grouping.
    """
    det_labels = {d.label for dets in detections_by_image.values() for d in dets}
    gt_labels = {lab for boxes in truth_by_image.values() for _, lab in boxes}
    _check_taxonomy(det_labels, taxonomy, "detections file")
    _check_taxonomy(gt_labels, taxonomy, "ground truth")

    class_names = sorted({lab.name for lab in det_labels | gt_labels})
    per_class: dict[str, CountTable] = {name: CountTable() for name in class_names}
    confusion = ConfusionMatrix(taxonomy)

    image_ids = sorted(set(detections_by_image) | set(truth_by_image))
    for image_id in image_ids:
        detections = list(detections_by_image.get(image_id, ()))
        truth = list(truth_by_image.get(image_id, ()))

        # Same-class matching decomposes exactly into per-class problems.
        for name in class_names:
            dets_c = [d for d in detections if d.label.name == name]
            truth_c = [(box, lab) for box, lab in truth if lab.name == name]
            if not dets_c and not truth_c:
                continue
            result = match_detections(dets_c, truth_c, iou_min=match_iou)
            per_class[name] = per_class[name] + result.counts

        # Class-agnostic pass feeds the confusion view.
        agnostic = match_detections(detections, truth, iou_min=match_iou,
                                    class_agnostic=True)
        for det_idx, gt_idx, _ in agnostic.matches:
            confusion.add_pair(truth[gt_idx][1], detections[det_idx].label)

    return EvaluationResult(per_class=per_class,
                            aggregate=merge_counts(per_class),
                            confusion=confusion, match_iou=match_iou)
