"""Score prediction JSONL records with a named metric."""

from __future__ import annotations

from typing import Sequence

from . import metrics
from .metrics import MetricReport
from .metrics.detection import ClassCounts
from .mixtures import CLICK_RE
from .schema import QuantBox, SchemaError, parse_schema, schema_to_detections

METRICS = ("squad_f1", "anls", "relaxed_accuracy", "exact_match", "cider", "f1_iou", "acc_iou")


class EvalError(ValueError):
    pass


def _golds(rec: dict) -> list[str]:
    if "gold_candidates" in rec:
        golds = rec["gold_candidates"]
    elif "gold" in rec:
        golds = [rec["gold"]]
    else:
        raise EvalError(f"record {rec.get('id')!r} has no gold or gold_candidates")
    if not golds or not all(isinstance(g, str) for g in golds):
        raise EvalError(f"record {rec.get('id')!r} needs a non-empty list of string golds")
    return golds


def _prediction(rec: dict) -> str:
    p = rec.get("prediction", "")
    if not isinstance(p, str):
        raise EvalError(f"record {rec.get('id')!r}: prediction must be a string")
    return p


def _box(entry) -> tuple[str | None, QuantBox]:
    if isinstance(entry, dict):
        return entry.get("class"), QuantBox(*entry["box"])
    return None, QuantBox(*entry)


def _detections(rec: dict, boxes_key: str, text_key: str) -> list[tuple[str, QuantBox]]:
    if boxes_key in rec:
        try:
            return [(_box(e)[0] or "", _box(e)[1]) for e in rec[boxes_key]]
        except (KeyError, TypeError, SchemaError) as e:
            raise EvalError(f"record {rec.get('id')!r}: bad {boxes_key}: {e}") from e
    text = rec.get(text_key)
    if not isinstance(text, str):
        raise EvalError(f"record {rec.get('id')!r} has neither {boxes_key} nor a {text_key} schema")
    try:
        return schema_to_detections(parse_schema(text))
    except SchemaError:
        if text_key == "prediction":
            return []  # an unparseable prediction simply detects nothing
        raise


def _single_pred_box(rec: dict) -> QuantBox | None:
    if rec.get("pred_boxes"):
        return _box(rec["pred_boxes"][0])[1]
    m = CLICK_RE.match(_prediction(rec).strip())
    if m:
        try:
            return QuantBox(*(int(g) for g in m.groups()))
        except SchemaError:
            return None
    return None


def evaluate(records: Sequence[dict], metric: str, *, ignore_case: bool = False,
             iou_threshold: float = metrics.IOU_THRESHOLD) -> MetricReport:
    if metric not in METRICS:
        raise EvalError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if metric == "cider":
        scores = metrics.cider_scores([_prediction(r) for r in records], [_golds(r) for r in records])
        return MetricReport(metric, sum(scores) / len(scores), len(scores), scores)
    if metric == "f1_iou":
        return _detection_report(records, iou_threshold)

    per_sample: list[float] = []
    for rec in records:
        pred = _prediction(rec)
        if metric == "squad_f1":
            s = metrics.squad_f1(pred, _golds(rec))
        elif metric == "anls":
            s = metrics.anls(pred, _golds(rec))
        elif metric == "relaxed_accuracy":
            s = max(metrics.relaxed_accuracy(pred, g) for g in _golds(rec))
        elif metric == "exact_match":
            s = max(metrics.exact_match(pred, g, ignore_case) for g in _golds(rec))
        else:
            gold = rec.get("gold_boxes")
            if not gold:
                raise EvalError(f"record {rec.get('id')!r} has no gold_boxes")
            s = metrics.acc_at_iou(_single_pred_box(rec), _box(gold[0])[1], iou_threshold)
        per_sample.append(float(s))
    score = sum(per_sample) / len(per_sample) if per_sample else 0.0
    return MetricReport(metric, score, len(per_sample), per_sample)


def _detection_report(records: Sequence[dict], iou_threshold: float) -> MetricReport:
    total = ClassCounts()
    per_sample = []
    for rec in records:
        m = metrics.match_detections(_detections(rec, "pred_boxes", "prediction"),
                                     _detections(rec, "gold_boxes", "gold"), iou_threshold)
        total.tp += m.tp
        total.fp += m.fp
        total.fn += m.fn
        per_sample.append(m.f1)
    extra = {"precision": total.precision, "recall": total.recall,
             "tp": total.tp, "fp": total.fp, "fn": total.fn}
    return MetricReport("f1_iou", total.f1, len(per_sample), per_sample, extra)
