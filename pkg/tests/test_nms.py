import numpy as np
import pytest

from sweepdet import BoundingBox, ScoredWindow, iou, nms

from conftest import EXCAVATOR, FD, GRADER


def candidate(box, prob, label=EXCAVATOR, scale_index=0):
    k = 3
    probs = np.full(k, (1 - prob) / (k - 1))
    probs[0] = prob
    return ScoredWindow(box=box, probs=probs, best_class=label,
                        best_prob=prob, scale_index=scale_index)


def verify_greedy_output(candidates, detections, threshold):
    """Exhaustive-pairs oracle for greedy NMS.

    The output is valid iff: it is a subset of the input, pairwise IoU
    never exceeds the threshold, every suppressed candidate overlaps some
    higher-priority accepted one beyond the threshold, and acceptance
    follows priority order.
    """
    def priority(c):
        return (-c.best_prob, c.box.y_min, c.box.x_min, c.scale_index,
                c.box.x_max, c.box.y_max, c.best_class.id)

    accepted_keys = [(d.box, d.label, d.prob) for d in detections]
    input_keys = [(c.box, c.best_class, c.best_prob) for c in candidates]
    for key in accepted_keys:
        assert key in input_keys, "output box not drawn from the input"

    for i, a in enumerate(detections):
        for b in detections[i + 1:]:
            assert iou(a.box, b.box) <= threshold, "output pair still overlaps"

    probs = [d.prob for d in detections]
    assert probs == sorted(probs, reverse=True), "acceptance order broken"

    accepted_set = {(d.box, d.prob) for d in detections}
    for cand in candidates:
        if (cand.box, cand.best_prob) in accepted_set:
            continue
        suppressors = [d for d in detections
                       if iou(d.box, cand.box) > threshold
                       and priority_of_detection(d) < priority(cand)]
        assert suppressors, "candidate was dropped without a suppressor"


def priority_of_detection(det):
    return (-det.prob, det.box.y_min, det.box.x_min, det.scale_index,
            det.box.x_max, det.box.y_max, det.label.id)


def test_single_candidate_survives():
    cand = candidate(BoundingBox(0, 0, 10, 10), 0.9)
    out = nms([cand], iou_threshold=0.5)
    assert len(out) == 1
    assert out[0].box == cand.box
    assert out[0].prob == 0.9


def test_identical_boxes_keep_highest_probability():
    box = BoundingBox(5, 5, 15, 15)
    out = nms([candidate(box, 0.8), candidate(box, 0.9)], iou_threshold=0.5)
    assert len(out) == 1
    assert out[0].prob == 0.9


def test_chain_suppression_keeps_disjoint_ends():
    # A=(0,0,4,4) p.9, B=(2,0,6,4) p.8, C=(4,0,8,4) p.7. Adjacent pairs
    # overlap with IoU 8/24 = 1/3 > 0.3 while A and C touch only along an
    # edge (IoU 0): B is suppressed by A and C survives.
    a = candidate(BoundingBox(0, 0, 4, 4), 0.9)
    b = candidate(BoundingBox(2, 0, 6, 4), 0.8)
    c = candidate(BoundingBox(4, 0, 8, 4), 0.7)
    assert iou(a.box, b.box) == pytest.approx(1 / 3)
    assert iou(b.box, c.box) == pytest.approx(1 / 3)
    assert iou(a.box, c.box) == 0.0
    out = nms([a, b, c], iou_threshold=0.3)
    assert [d.box for d in out] == [a.box, c.box]
    verify_greedy_output([a, b, c], out, 0.3)


def test_ties_break_topmost_then_leftmost():
    top = candidate(BoundingBox(0, 0, 10, 10), 0.9)
    bottom = candidate(BoundingBox(0, 2, 10, 12), 0.9)
    out = nms([bottom, top], iou_threshold=0.5)
    assert out[0].box == top.box


def test_class_agnostic_by_default():
    box = BoundingBox(0, 0, 10, 10)
    out = nms([candidate(box, 0.9, EXCAVATOR), candidate(box, 0.8, GRADER)],
              iou_threshold=0.5)
    assert len(out) == 1


def test_per_class_mode_keeps_both_classes():
    box = BoundingBox(0, 0, 10, 10)
    out = nms([candidate(box, 0.9, EXCAVATOR), candidate(box, 0.8, GRADER)],
              iou_threshold=0.5, per_class=True)
    assert len(out) == 2


def test_false_detection_candidates_rejected():
    with pytest.raises(ValueError):
        nms([candidate(BoundingBox(0, 0, 4, 4), 0.9, FD)], iou_threshold=0.5)


def test_idempotence_and_properties_on_random_sets():
    rng = np.random.default_rng(99)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        cands = []
        for _ in range(n):
            x = int(rng.integers(0, 90))
            y = int(rng.integers(0, 90))
            w = int(rng.integers(4, 30))
            h = int(rng.integers(4, 30))
            cands.append(candidate(BoundingBox(x, y, x + w, y + h),
                                   float(rng.uniform(0.2, 1.0)),
                                   scale_index=int(rng.integers(0, 2))))
        threshold = float(rng.uniform(0.1, 0.9))
        out = nms(cands, iou_threshold=threshold)
        verify_greedy_output(cands, out, threshold)

        # Idempotence: feeding the survivors back changes nothing.
        survivors = [candidate(d.box, d.prob, d.label, d.scale_index)
                     for d in out]
        again = nms(survivors, iou_threshold=threshold)
        assert [(d.box, d.prob) for d in again] == \
            [(d.box, d.prob) for d in out]
