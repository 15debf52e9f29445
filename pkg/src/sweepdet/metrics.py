"""Evaluation: count tables, precision/recall/F1 and confusion matrices.

Detection evaluation matches detections one-to-one against same-class
ground-truth boxes by IoU; classification evaluation accumulates
(true, predicted) pairs into a confusion matrix. Precision is
TP/(TP + FP) and recall TP/(TP + FN), with a vacuous-perfection rule for
empty denominators so the metrics are total functions. F1 is the usual
2PR/(P + R).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

import numpy as np

from ._validation import check_fraction
from .boxes import BoundingBox, iou
from .nms import Detection
from .taxonomy import ClassLabel, Taxonomy


@dataclass(frozen=True)
class CountTable:
    """TP/FP/FN counts, with TN optional (detection runs have no
    meaningful true-negative population)."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int | None = None

    def __post_init__(self):
        for name in ("tp", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.tn is not None and self.tn < 0:
            raise ValueError("tn must be non-negative")

    def __add__(self, other: "CountTable") -> "CountTable":
        tn = None
        if self.tn is not None or other.tn is not None:
            tn = (self.tn or 0) + (other.tn or 0)
        return CountTable(self.tp + other.tp, self.fp + other.fp,
                          self.fn + other.fn, tn)

    def as_dict(self) -> dict:
        out = {"tp": self.tp, "fp": self.fp, "fn": self.fn}
        if self.tn is not None:
            out["tn"] = self.tn
        return out


def precision_recall(counts: CountTable) -> tuple[float, float]:
    """Precision TP/(TP+FP) and recall TP/(TP+FN).

    Zero-denominator rule: claiming nothing is perfect precision unless
    targets were missed; having nothing to find is perfect recall unless
    something was claimed anyway.
    """
    if counts.tp + counts.fp == 0:
        precision = 1.0 if counts.fn == 0 else 0.0
    else:
        precision = counts.tp / (counts.tp + counts.fp)
    if counts.tp + counts.fn == 0:
        recall = 1.0 if counts.fp == 0 else 0.0
    else:
        recall = counts.tp / (counts.tp + counts.fn)
    return precision, recall


def f1(precision: float, recall: float) -> float:
    """Harmonic-mean F1 = 2PR/(P + R), or 0 when P + R = 0."""
    check_fraction("precision", precision)
    check_fraction("recall", recall)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def percent_half_up(value: float) -> int:
    """Whole-percent rounding, half away from zero, as in printed tables."""
    return int(Decimal(repr(float(value) * 100.0))
               .quantize(Decimal("1"), rounding=ROUND_HALF_UP))


@dataclass
class MatchResult:
    counts: CountTable
    #: (detection index, ground-truth index, IoU) for each matched pair,
    #: indices referring to the caller's input order
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)
    unmatched_ground_truth: list[int] = field(default_factory=list)


def _detection_order(detections: Sequence[Detection]) -> list[int]:
    return sorted(range(len(detections)), key=lambda i: (
        -detections[i].prob,
        detections[i].box.y_min, detections[i].box.x_min,
        detections[i].box.y_max, detections[i].box.x_max,
        detections[i].label.id))


def match_detections(detections: Sequence[Detection],
                     ground_truth: Sequence[tuple[BoundingBox, ClassLabel]],
                     iou_min: float = 0.5,
                     class_agnostic: bool = False) -> MatchResult:
    """Greedy one-to-one matching of detections to ground truth.

    Detections are visited in decreasing-probability order (deterministic
    tie-breaks); each takes the unmatched same-class ground-truth box of
    highest IoU at or above ``iou_min``. Matched detections are TP,
    leftover detections FP, leftover ground truth FN. With
    ``class_agnostic`` the class constraint is dropped (used to build
    cross-class confusion views).
    """
    check_fraction("iou_min", iou_min, 0.0, 1.0, inclusive_low=False)
    taken = [False] * len(ground_truth)
    matches: list[tuple[int, int, float]] = []
    unmatched_detections: list[int] = []

    for det_idx in _detection_order(detections):
        det = detections[det_idx]
        best_gt = -1
        best_iou = 0.0
        for gt_idx, (gt_box, gt_label) in enumerate(ground_truth):
            if taken[gt_idx]:
                continue
            if not class_agnostic and gt_label != det.label:
                continue
            overlap = iou(det.box, gt_box)
            if overlap >= iou_min and overlap > best_iou:
                best_iou = overlap
                best_gt = gt_idx
        if best_gt >= 0:
            taken[best_gt] = True
            matches.append((det_idx, best_gt, best_iou))
        else:
            unmatched_detections.append(det_idx)

    unmatched_gt = [i for i, used in enumerate(taken) if not used]
    counts = CountTable(tp=len(matches), fp=len(unmatched_detections),
                        fn=len(unmatched_gt))
    return MatchResult(counts=counts, matches=matches,
                       unmatched_detections=sorted(unmatched_detections),
                       unmatched_ground_truth=unmatched_gt)


class ConfusionMatrix:
    """Square (true class x predicted class) count matrix over a taxonomy."""

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy
        self.matrix = np.zeros((len(taxonomy), len(taxonomy)), dtype=np.int64)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[ClassLabel, ClassLabel]],
                   taxonomy: Taxonomy) -> "ConfusionMatrix":
        cm = cls(taxonomy)
        for true_label, predicted_label in pairs:
            cm.add_pair(true_label, predicted_label)
        return cm

    def add_pair(self, true_label: ClassLabel, predicted_label: ClassLabel):
        row = self.taxonomy.index_of(true_label)
        col = self.taxonomy.index_of(predicted_label)
        self.matrix[row, col] += 1

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def row_normalized(self) -> np.ndarray:
        """Recall view: each row sums to 1 (empty rows stay zero)."""
        sums = self.matrix.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sums > 0, self.matrix / sums, 0.0)
        return out

    def column_normalized(self) -> np.ndarray:
        """Precision view: each column sums to 1 (empty columns stay zero)."""
        sums = self.matrix.sum(axis=0, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(sums > 0, self.matrix / sums, 0.0)
        return out

    def class_accuracy(self, label: ClassLabel) -> float:
        """Row-normalized diagonal entry: the class's recall."""
        idx = self.taxonomy.index_of(label)
        row_sum = int(self.matrix[idx].sum())
        if row_sum == 0:
            return 0.0
        return float(self.matrix[idx, idx]) / row_sum

    def to_csv(self) -> str:
        names = self.taxonomy.names
        lines = ["true\\predicted," + ",".join(_csv_quote(n) for n in names)]
        for i, name in enumerate(names):
            lines.append(_csv_quote(name) + "," +
                         ",".join(str(int(v)) for v in self.matrix[i]))
        return "\n".join(lines) + "\n"


def _csv_quote(text: str) -> str:
    if "," in text or '"' in text:
        return '"' + text.replace('"', '""') + '"'
    return text


@dataclass(frozen=True)
class MetricsReport:
    counts: CountTable
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, counts: CountTable) -> "MetricsReport":
        precision, recall = precision_recall(counts)
        return cls(counts=counts, precision=precision, recall=recall,
                   f1=f1(precision, recall))

    def as_dict(self) -> dict:
        return {
            "counts": self.counts.as_dict(),
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "precision_pct": percent_half_up(self.precision),
            "recall_pct": percent_half_up(self.recall),
            "f1_pct": percent_half_up(self.f1),
        }


def render_count_table(report: MetricsReport, title: str = "Detection results"
                       ) -> str:
    """Human-readable table in the conventional results layout."""
    rows = [
        ("Recall (Accuracy)", f"{percent_half_up(report.recall)}%"),
        ("Precision", f"{percent_half_up(report.precision)}%"),
        ("F1 Score", f"{percent_half_up(report.f1)}%"),
        ("True Positives", str(report.counts.tp)),
        ("False Positives", str(report.counts.fp)),
        ("False Negatives", str(report.counts.fn)),
    ]
    if report.counts.tn is not None:
        rows.append(("True Negatives", str(report.counts.tn)))
    width = max(len(name) for name, _ in rows)
    lines = [title, "-" * len(title)]
    lines += [f"{name.ljust(width)}  {value}" for name, value in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ReportedPercentCheck:
    """Outcome of checking printed percentages against a count table."""

    verdict: str  # "match" | "transposed" | "mismatch"
    precision: float
    recall: float
    precision_pct: int
    recall_pct: int

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "computed_precision": self.precision,
            "computed_recall": self.recall,
            "computed_precision_pct": self.precision_pct,
            "computed_recall_pct": self.recall_pct,
        }


def check_reported_percentages(counts: CountTable, reported_precision_pct: int,
                               reported_recall_pct: int) -> ReportedPercentCheck:
    """Compare printed whole-percent precision/recall against the counts.

    Returns verdict "match" when they agree, "transposed" when they agree
    only with the precision and recall labels swapped (a known failure
    mode of hand-built tables), and "mismatch" otherwise.
    """
    precision, recall = precision_recall(counts)
    p_pct, r_pct = percent_half_up(precision), percent_half_up(recall)
    if (p_pct, r_pct) == (reported_precision_pct, reported_recall_pct):
        verdict = "match"
    elif (p_pct, r_pct) == (reported_recall_pct, reported_precision_pct):
        verdict = "transposed"
    else:
        verdict = "mismatch"
    return ReportedPercentCheck(verdict=verdict, precision=precision,
                                recall=recall, precision_pct=p_pct,
                                recall_pct=r_pct)


def merge_counts(tables: Mapping[str, CountTable]) -> CountTable:
    """Associative reduction of per-class or per-scene count tables."""
    total = CountTable()
    for table in tables.values():
        total = total + table
    return total
