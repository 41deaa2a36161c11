"""Render -> complete -> parse -> validate -> records, over a stream of screens."""

from __future__ import annotations

import logging
import random
import re
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Iterator, Mapping

from ..metrics.detection import iou
from ..metrics.text import normalize_answer
from ..mixtures import TaskRecord
from ..schema import DEFAULT_ORDER, ScreenSchema
from .backend import Backend, BackendError, CompletionRequest, complete
from .parsing import QaPair, ResponseParseError, parse_rephrase_response, parse_summary_response, split_nav, split_qa
from .templates import PromptTemplate, render_prompt

log = logging.getLogger(__name__)

DEFAULT_FLAG_THRESHOLD = 0.2
DEFAULT_MAX_IN_FLIGHT = 8
NAV_MATCH_IOU = 0.5
SUMMARY_INSTRUCTION = "Summarize the screen."

_NUMERIC = re.compile(r"[-+]?(\d+([.,]\d+)*|\.\d+)%?")


def validate_qa(pair: QaPair, schema: ScreenSchema) -> str:
    """Heuristic check of an answer against the schema text.

    Returns ``numeric`` for purely numeric answers (they may be derived by
    counting or arithmetic), ``grounded`` when every normalized answer
    token occurs in some payload, else ``ungrounded``.
    """
    raw = pair.answer.split()
    if raw and all(_NUMERIC.fullmatch(tok) for tok in raw):
        return "numeric"
    tokens = normalize_answer(pair.answer).split()
    vocab = set()
    for el in schema.walk():
        if el.payload is not None and not el.masked:
            vocab.update(normalize_answer(el.payload).split())
    if tokens and all(t in vocab for t in tokens):
        return "grounded"
    return "ungrounded"


def validate_nav_target(target, schema: ScreenSchema, min_iou: float = NAV_MATCH_IOU) -> str:
    """``grounded`` if the target box matches some schema element."""
    if target is not None and any(iou(target, el.box) >= min_iou for el in schema.walk()):
        return "grounded"
    return "ungrounded"


@dataclass
class GenerationItem:
    image_ref: str
    schema: ScreenSchema | None = None
    params: dict = field(default_factory=dict)


@dataclass
class GenerationStats:
    items: int = 0
    parsed_entries: int = 0
    rejected_entries: int = 0
    rejected_responses: int = 0
    backend_failures: int = 0
    emitted: int = 0
    flagged: int = 0
    flag_threshold: float = DEFAULT_FLAG_THRESHOLD

    @property
    def rejected(self) -> int:
        return self.rejected_entries + self.rejected_responses

    @property
    def flagged_fraction(self) -> float:
        return self.flagged / self.emitted if self.emitted else 0.0

    @property
    def needs_review(self) -> bool:
        return self.flagged_fraction > self.flag_threshold

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(rejected=self.rejected, flagged_fraction=self.flagged_fraction,
                   needs_review=self.needs_review)
        return out


@dataclass
class _Outcome:
    records: list[TaskRecord] = field(default_factory=list)
    parsed: int = 0
    rejected_entries: int = 0
    rejected_response: bool = False
    backend_failed: bool = False


def _to_records(template: PromptTemplate, item: GenerationItem, text: str, order: str) -> _Outcome:
    out = _Outcome()
    meta = {"template": template.name}
    schema = item.schema or ScreenSchema()
    if template.name == "qa":
        pairs, bad = split_qa(text)
        out.parsed, out.rejected_entries = len(pairs) + bad, bad
        for p in pairs:
            verdict = validate_qa(p, schema)
            out.records.append(TaskRecord("screen_qa", item.image_ref, p.question, p.answer,
                                          {**meta, "verdict": verdict}))
    elif template.name == "navigation":
        samples, bad = split_nav(text, order)
        out.parsed, out.rejected_entries = len(samples) + bad, bad
        for s in samples:
            verdict = validate_nav_target(s.target, schema)
            out.records.append(TaskRecord("screen_navigation", item.image_ref, s.instruction, s.target_text(),
                                          {**meta, "verdict": verdict}))
    elif template.name == "summarization":
        summary = parse_summary_response(text)
        out.parsed = 1
        out.records.append(TaskRecord("screen_summarization", item.image_ref, SUMMARY_INSTRUCTION,
                                      summary, {**meta, "verdict": "unchecked"}))
    else:
        answers = parse_rephrase_response(text)
        out.parsed = 1
        question = str(item.params.get("question", ""))
        out.records.append(TaskRecord("screen_qa", item.image_ref, question, answers[0],
                                      {**meta, "candidates": answers, "verdict": "unchecked"}))
    return out


def _process(index: int, item: GenerationItem, template: PromptTemplate, backend: Backend,
             params: Mapping, order: str, request_opts: Mapping, seed: int | None) -> _Outcome:
    prompt = render_prompt(template, item.schema, {**params, **item.params}, order=order)
    req = CompletionRequest(prompt, request_opts.get("temperature", 0.0), request_opts.get("max_tokens", 1024))
    rng = random.Random(None if seed is None else seed * 1_000_003 + index)
    try:
        result = complete(backend, req, max_attempts=request_opts.get("max_attempts", 3),
                          base_delay=request_opts.get("base_delay", 0.5), rng=rng)
    except BackendError as e:
        log.error("item %d (%s): backend failure: %s", index, item.image_ref, e)
        return _Outcome(backend_failed=True)
    try:
        return _to_records(template, item, result.text, order)
    except ResponseParseError as e:
        log.warning("item %d (%s): rejected response: %s", index, item.image_ref, e)
        return _Outcome(rejected_response=True)


def generate_dataset(
    items: Iterable[GenerationItem],
    template: PromptTemplate,
    backend: Backend,
    params: Mapping | None = None,
    *,
    stats: GenerationStats | None = None,
    order: str = DEFAULT_ORDER,
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    seed: int | None = 0,
    **request_opts,
) -> Iterator[TaskRecord]:
    """Yield task records for each item, in input order.

    Up to ``max_in_flight`` items are processed concurrently. Backend
    failures and unparseable responses are counted in ``stats`` and never
    stop the stream. ``request_opts`` may set temperature, max_tokens,
    max_attempts and base_delay.
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    stats = stats if stats is not None else GenerationStats()
    params = dict(params or {})
    pending: deque = deque()

    def drain_one():
        outcome: _Outcome = pending.popleft().result()
        stats.parsed_entries += outcome.parsed
        stats.rejected_entries += outcome.rejected_entries
        stats.rejected_responses += outcome.rejected_response
        stats.backend_failures += outcome.backend_failed
        for rec in outcome.records:
            stats.emitted += 1
            stats.flagged += rec.metadata.get("verdict") == "ungrounded"
        return outcome.records

    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        for index, item in enumerate(items):
            stats.items += 1
            pending.append(pool.submit(_process, index, item, template, backend, params, order,
                                       request_opts, seed))
            if len(pending) >= max_in_flight:
                yield from drain_one()
        while pending:
            yield from drain_one()
