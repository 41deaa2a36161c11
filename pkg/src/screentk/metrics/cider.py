"""CIDEr-D: TF-IDF n-gram consensus with clipping and a length penalty."""

from __future__ import annotations

import math
from collections import Counter
from typing import Mapping, Sequence

from nltk.stem.porter import PorterStemmer

from .text import _PUNCT

MAX_N = 4
SIGMA = 6.0
SCALE = 10.0

_stemmer = PorterStemmer()


def tokenize(sentence: str) -> list[str]:
    """Lowercase, drop punctuation, split on whitespace, Porter-stem."""
    s = "".join(" " if ch in _PUNCT else ch for ch in sentence.lower())
    return [_stemmer.stem(tok) for tok in s.split()]


def ngram_counts(tokens: Sequence[str], max_n: int = MAX_N) -> Counter:
    counts: Counter = Counter()
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            counts[tuple(tokens[i:i + n])] += 1
    return counts


def document_frequency(references_per_item: Sequence[Sequence[str]], max_n: int = MAX_N) -> Counter:
    """Number of items whose reference set contains each n-gram."""
    df: Counter = Counter()
    for refs in references_per_item:
        seen = set()
        for ref in refs:
            seen.update(ngram_counts(tokenize(ref), max_n))
        df.update(seen)
    return df


def _tfidf(counts: Counter, df: Mapping, log_n: float, max_n: int):
    vecs: list[dict] = [{} for _ in range(max_n)]
    norms = [0.0] * max_n
    for gram, tf in counts.items():
        k = len(gram) - 1
        w = tf * (log_n - math.log(max(1.0, df.get(gram, 0.0))))
        vecs[k][gram] = w
        norms[k] += w * w
    return vecs, [math.sqrt(x) for x in norms]


def _similarity(hyp, ref, len_hyp: int, len_ref: int, max_n: int, sigma: float) -> float:
    vh, nh = hyp
    vr, nr = ref
    penalty = math.exp(-((len_hyp - len_ref) ** 2) / (2 * sigma ** 2))
    total = 0.0
    for k in range(max_n):
        if nh[k] == 0 or nr[k] == 0:
            continue
        dot = sum(min(w, vr[k].get(g, 0.0)) * vr[k].get(g, 0.0) for g, w in vh[k].items())
        total += dot / (nh[k] * nr[k]) * penalty
    return total / max_n


def cider_scores(
    predictions: Sequence[str],
    references_per_item: Sequence[Sequence[str]],
    *,
    document_freq: Mapping | None = None,
    corpus_size: int | None = None,
    max_n: int = MAX_N,
    sigma: float = SIGMA,
) -> list[float]:
    """Per-item CIDEr-D scores in [0, 10].

    Document frequencies come from the references of the corpus itself
    unless an external table (and the corpus size it was computed on) is
    given. A one-item corpus without an external table is rejected because
    every n-gram would get zero IDF.
    """
    if len(predictions) != len(references_per_item):
        raise ValueError("predictions and references must have the same length")
    if not predictions:
        raise ValueError("cider needs a non-empty corpus")
    if any(not refs for refs in references_per_item):
        raise ValueError("every item needs at least one reference")
    if document_freq is None:
        if len(predictions) < 2:
            raise ValueError("cider needs >= 2 items or an external document-frequency table")
        document_freq = document_frequency(references_per_item, max_n)
        corpus_size = len(references_per_item)
    elif corpus_size is None or corpus_size < 1:
        raise ValueError("an external document-frequency table needs its corpus_size")
    log_n = math.log(float(corpus_size))

    scores = []
    for pred, refs in zip(predictions, references_per_item):
        toks = tokenize(pred)
        hyp = _tfidf(ngram_counts(toks, max_n), document_freq, log_n, max_n)
        acc = 0.0
        for ref in refs:
            rtoks = tokenize(ref)
            rvec = _tfidf(ngram_counts(rtoks, max_n), document_freq, log_n, max_n)
            acc += _similarity(hyp, rvec, len(toks), len(rtoks), max_n, sigma)
        scores.append(SCALE * acc / len(refs))
    return scores


def cider(predictions: Sequence[str], references_per_item: Sequence[Sequence[str]], **kwargs) -> float:
    """Corpus CIDEr-D: mean of the per-item scores."""
    scores = cider_scores(predictions, references_per_item, **kwargs)
    return sum(scores) / len(scores)
