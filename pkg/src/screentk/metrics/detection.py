"""Box overlap and per-class detection matching."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

IOU_THRESHOLD = 0.1


def _coords(b) -> tuple[float, float, float, float]:
    if hasattr(b, "ymin"):
        return b.ymin, b.xmin, b.ymax, b.xmax
    ymin, xmin, ymax, xmax = b
    return ymin, xmin, ymax, xmax


def iou(a, b) -> float:
    """Intersection over union of two (ymin, xmin, ymax, xmax) boxes.

    Zero-area boxes score 0 against everything, themselves included.
    """
    ay0, ax0, ay1, ax1 = _coords(a)
    by0, bx0, by1, bx1 = _coords(b)
    area_a = (ay1 - ay0) * (ax1 - ax0)
    area_b = (by1 - by0) * (bx1 - bx0)
    if area_a <= 0 or area_b <= 0:
        return 0.0
    ih = min(ay1, by1) - max(ay0, by0)
    iw = min(ax1, bx1) - max(ax0, bx0)
    inter = max(ih, 0) * max(iw, 0)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def acc_at_iou(pred_box, gold_box, threshold: float = IOU_THRESHOLD) -> int:
    """1 if the single predicted box overlaps gold at IoU >= threshold."""
    if pred_box is None:
        return 0
    return int(iou(pred_box, gold_box) >= threshold)


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp, self.fn)

    @property
    def recall(self) -> float:
        return _ratio(self.tp, self.tp + self.fn, self.fp)

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _ratio(num: int, den: int, other_errors: int) -> float:
    # both sides empty counts as perfect; an empty side with errors on the other as 0
    if den == 0:
        return 1.0 if other_errors == 0 else 0.0
    return num / den


@dataclass
class DetectionMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    per_class: dict[str, ClassCounts] = field(default_factory=dict)
    # (class, pred index, gold index, iou) with indices into the input lists
    matches: list[tuple[str, int, int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "per_class": {
                c: {"tp": k.tp, "fp": k.fp, "fn": k.fn, "precision": k.precision,
                    "recall": k.recall, "f1": k.f1}
                for c, k in sorted(self.per_class.items())
            },
        }


def _match_class(ious: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Maximum-cardinality matching on the IoU >= threshold graph,
    tie-broken by total IoU.

    Edges weigh ``big + iou`` with ``big`` larger than any possible IoU
    sum, so one extra pair always beats any IoU gain.
    """
    if ious.size == 0:
        return []
    edge = ious >= threshold
    big = float(min(ious.shape) + 1)
    weights = np.where(edge, big + ious, 0.0)
    rows, cols = linear_sum_assignment(weights, maximize=True)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if edge[r, c]]


def match_detections(
    pred: Sequence[tuple[str, object]],
    gold: Sequence[tuple[str, object]],
    iou_threshold: float = IOU_THRESHOLD,
) -> DetectionMetrics:
    """Match (class, box) predictions to gold per class; micro-averaged P/R/F1."""
    by_class_pred: dict[str, list[int]] = defaultdict(list)
    by_class_gold: dict[str, list[int]] = defaultdict(list)
    for i, (c, _) in enumerate(pred):
        by_class_pred[c].append(i)
    for i, (c, _) in enumerate(gold):
        by_class_gold[c].append(i)

    per_class: dict[str, ClassCounts] = {}
    matches = []
    for c in sorted(set(by_class_pred) | set(by_class_gold)):
        pi, gi = by_class_pred.get(c, []), by_class_gold.get(c, [])
        ious = np.array([[iou(pred[p][1], gold[g][1]) for g in gi] for p in pi]).reshape(len(pi), len(gi))
        pairs = _match_class(ious, iou_threshold)
        for r, k in pairs:
            matches.append((c, pi[r], gi[k], float(ious[r, k])))
        tp = len(pairs)
        per_class[c] = ClassCounts(tp, len(pi) - tp, len(gi) - tp)

    total = ClassCounts(
        sum(k.tp for k in per_class.values()),
        sum(k.fp for k in per_class.values()),
        sum(k.fn for k in per_class.values()),
    )
    return DetectionMetrics(
        total.precision, total.recall, total.f1, total.tp, total.fp, total.fn, per_class, matches,
    )
