"""Evaluation metrics for screen, document and infographic tasks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .cider import cider, cider_scores
from .detection import IOU_THRESHOLD, DetectionMetrics, acc_at_iou, iou, match_detections
from .text import anls, exact_match, levenshtein, normalize_answer, relaxed_accuracy, squad_f1

__all__ = [
    "IOU_THRESHOLD",
    "DetectionMetrics",
    "MetricReport",
    "acc_at_iou",
    "aggregate_score",
    "anls",
    "cider",
    "cider_scores",
    "exact_match",
    "iou",
    "levenshtein",
    "match_detections",
    "normalize_answer",
    "relaxed_accuracy",
    "squad_f1",
]


@dataclass
class MetricReport:
    metric: str
    score: float
    count: int
    per_sample: list[float] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self, with_samples: bool = False) -> dict:
        out = {"score": self.score, "count": self.count, **self.extra}
        if with_samples and self.per_sample is not None:
            out["per_sample"] = self.per_sample
        return out


def aggregate_score(scores_variant: Mapping[str, float], scores_baseline: Mapping[str, float]) -> float:
    """Geometric mean over tasks of variant / baseline score ratios."""
    if set(scores_variant) != set(scores_baseline):
        missing = set(scores_variant) ^ set(scores_baseline)
        raise ValueError(f"task keys differ: {sorted(missing)}")
    if not scores_variant:
        raise ValueError("aggregate_score needs at least one task")
    logs = []
    for task, base in scores_baseline.items():
        if base <= 0:
            raise ValueError(f"baseline score for {task!r} must be positive, got {base}")
        ratio = scores_variant[task] / base
        if ratio < 0:
            raise ValueError(f"variant score for {task!r} is negative")
        if ratio == 0:
            return 0.0
        logs.append(math.log(ratio))
    return math.exp(math.fsum(logs) / len(logs))
