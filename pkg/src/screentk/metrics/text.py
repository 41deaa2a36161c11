"""String-answer metrics: SQuAD F1, ANLS, relaxed accuracy, exact match."""

from __future__ import annotations

import math
import re
import string
from collections import Counter
from typing import Sequence

ANLS_TAU = 0.5
RELAXED_TOLERANCE = 0.05

_PUNCT = set(string.punctuation)
_ARTICLES = re.compile(r"\b(a|an|the)\b")


def normalize_answer(s: str) -> str:
    """Lower text and remove punctuation, articles and extra whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in _PUNCT)
    s = _ARTICLES.sub(" ", s)
    return " ".join(s.split())


def _token_f1(prediction: str, gold: str) -> float:
    pred_toks = normalize_answer(prediction).split()
    gold_toks = normalize_answer(gold).split()
    if not pred_toks or not gold_toks:
        return float(pred_toks == gold_toks)
    common = Counter(pred_toks) & Counter(gold_toks)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(pred_toks)
    recall = num_same / len(gold_toks)
    return 2 * precision * recall / (precision + recall)


def squad_f1(prediction: str, candidates: Sequence[str]) -> float:
    """Best token-bag F1 of ``prediction`` over the candidate answers."""
    if isinstance(candidates, str):
        candidates = [candidates]
    if not candidates:
        raise ValueError("squad_f1 needs at least one candidate answer")
    return max(_token_f1(prediction, c) for c in candidates)


def levenshtein(a: str, b: str) -> int:
    """Unit-cost edit distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def anls(prediction: str, golds: Sequence[str], tau: float = ANLS_TAU) -> float:
    """Normalized Levenshtein similarity, best over gold answers.

    Scores below the cutoff (normalized distance >= tau) count as 0.
    """
    if isinstance(golds, str):
        golds = [golds]
    if not golds:
        raise ValueError("anls needs at least one gold answer")
    p = prediction.strip().lower()
    best = 0.0
    for gold in golds:
        g = gold.strip().lower()
        longest = max(len(p), len(g))
        nl = levenshtein(p, g) / longest if longest else 0.0
        best = max(best, 1.0 - nl if nl < tau else 0.0)
    return best


def _to_number(s: str) -> float | None:
    s = s.strip()
    if s.endswith("%"):
        s = s[:-1].strip()
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def relaxed_accuracy(prediction: str, gold: str, tolerance: float = RELAXED_TOLERANCE) -> int:
    """Numeric answers match within ``tolerance`` relative error; text exactly."""
    p, g = _to_number(prediction), _to_number(gold)
    if p is not None and g is not None:
        if g == 0:
            return int(p == 0)
        return int(abs(p - g) <= tolerance * abs(g))
    return int(prediction.strip().lower() == gold.strip().lower())


def exact_match(prediction: str, gold: str, ignore_case: bool = False) -> int:
    if ignore_case:
        return int(prediction.casefold() == gold.casefold())
    return int(prediction == gold)
