"""Task records, mixture weighting and sampling, multipage-document pairs."""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

from .schema import SchemaError, parse_schema

TASK_TYPES = (
    "screen_annotation",
    "screen_qa",
    "screen_navigation",
    "screen_summarization",
    "doc_vqa_page",
)
NO_ANSWER = "no answer"
DEFAULT_CAP = 0.15
DEFAULT_NEG_KEEP_PROB = 0.25

CLICK_RE = re.compile(r"click (0|[1-9][0-9]{0,2}) (0|[1-9][0-9]{0,2}) (0|[1-9][0-9]{0,2}) (0|[1-9][0-9]{0,2})\Z")


class RecordError(ValueError):
    pass


@dataclass
class TaskRecord:
    task_type: str
    image_ref: str
    input_text: str
    target_text: str
    metadata: dict = field(default_factory=dict)

    def validate(self) -> "TaskRecord":
        if self.task_type not in TASK_TYPES:
            raise RecordError(f"unknown task_type {self.task_type!r}")
        for name in ("image_ref", "input_text", "target_text"):
            if not isinstance(getattr(self, name), str):
                raise RecordError(f"{name} must be a string")
        if not isinstance(self.metadata, dict):
            raise RecordError("metadata must be an object")
        if self.task_type == "screen_navigation":
            m = CLICK_RE.match(self.target_text)
            if not m:
                raise RecordError(f"navigation target {self.target_text!r} is not 'click INT INT INT INT'")
        elif self.task_type == "screen_annotation":
            try:
                parse_schema(self.target_text)
            except SchemaError as e:
                raise RecordError(f"annotation target does not parse: {e}") from e
        return self

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "TaskRecord":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordError(f"malformed JSON: {e}") from e
        if not isinstance(obj, dict):
            raise RecordError("record must be a JSON object")
        missing = [k for k in ("task_type", "image_ref", "input_text", "target_text") if k not in obj]
        if missing:
            raise RecordError(f"missing fields: {', '.join(missing)}")
        extra = set(obj) - {"task_type", "image_ref", "input_text", "target_text", "metadata"}
        if extra:
            raise RecordError(f"unknown top-level fields: {', '.join(sorted(extra))}")
        return cls(
            obj["task_type"], obj["image_ref"], obj["input_text"], obj["target_text"],
            obj.get("metadata", {}),
        ).validate()


def record_roundtrip(record: TaskRecord) -> TaskRecord:
    return TaskRecord.from_json(record.to_json())


def read_records(path: str | Path) -> Iterator[TaskRecord]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield TaskRecord.from_json(line)


# -- weighting --------------------------------------------------------------


@dataclass(frozen=True)
class MixtureEntry:
    name: str
    size: int
    source: str | None = None


@dataclass
class MixtureSpec:
    tasks: list[MixtureEntry]
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        names = [t.name for t in self.tasks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate task names in mixture")
        if not self.tasks:
            raise ValueError("mixture needs at least one task")
        if any(t.size <= 0 for t in self.tasks):
            raise ValueError("task sizes must be positive")
        if not 0 < self.cap <= 1:
            raise ValueError(f"cap must be in (0, 1], got {self.cap}")
        if self.cap * len(self.tasks) < 1 - 1e-12:
            raise ValueError(f"cap {self.cap} infeasible for {len(self.tasks)} tasks")

    @classmethod
    def from_dict(cls, obj: Mapping) -> "MixtureSpec":
        tasks = [MixtureEntry(t["name"], int(t["size"]), t.get("source")) for t in obj["tasks"]]
        return cls(tasks, float(obj.get("cap", DEFAULT_CAP)))

    def to_dict(self) -> dict:
        return {"tasks": [asdict(t) for t in self.tasks], "cap": self.cap}


def compute_weights(spec: MixtureSpec) -> dict[str, float]:
    """Size-proportional weights with a per-task cap (water-filling)."""
    clamped: set[str] = set()
    while True:
        free = [t for t in spec.tasks if t.name not in clamped]
        mass = 1.0 - spec.cap * len(clamped)
        total = sum(t.size for t in free)
        weights = {t.name: mass * t.size / total for t in free} if free else {}
        over = {n for n, w in weights.items() if w > spec.cap}
        if not over:
            break
        clamped |= over
    weights.update({n: spec.cap for n in clamped})
    return {t.name: weights[t.name] for t in spec.tasks}


def sample_mixture(
    records_by_task: Mapping[str, Sequence[TaskRecord]],
    weights: Mapping[str, float],
    n: int,
    seed: int,
) -> Iterator[TaskRecord]:
    """Draw ``n`` records: a task by weight, then a record uniformly within it."""
    names = [name for name in weights if weights[name] > 0]
    for name in names:
        if not records_by_task.get(name):
            raise ValueError(f"task {name!r} has positive weight but no records")
    if n > 0 and not names:
        raise ValueError("no task has positive weight")
    rng = random.Random(seed)
    w = [weights[name] for name in names]
    for _ in range(n):
        name = rng.choices(names, weights=w)[0]
        pool = records_by_task[name]
        yield pool[rng.randrange(len(pool))]


def file_checksum(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(spec: MixtureSpec, weights: Mapping[str, float], seed: int, n: int,
                   base_dir: str | Path = ".") -> dict:
    checksums = {}
    for t in spec.tasks:
        if t.source:
            checksums[t.name] = file_checksum(Path(base_dir) / t.source)
    return {
        "spec": spec.to_dict(),
        "weights": dict(weights),
        "cap": spec.cap,
        "seed": seed,
        "num_samples": n,
        "source_checksums": checksums,
    }


# -- multipage documents ----------------------------------------------------


@dataclass(frozen=True)
class PagePair:
    question: str
    page_ref: str
    answer: str
    polarity: str

    def __post_init__(self):
        if self.polarity == "positive" and self.answer == NO_ANSWER:
            raise ValueError("positive pair cannot carry the no-answer marker")
        if self.polarity == "negative" and self.answer != NO_ANSWER:
            raise ValueError("negative pair must carry the no-answer marker")
        if self.polarity not in ("positive", "negative"):
            raise ValueError(f"unknown polarity {self.polarity!r}")

    def to_record(self) -> TaskRecord:
        return TaskRecord("doc_vqa_page", self.page_ref, self.question, self.answer,
                          {"polarity": self.polarity})


def build_mpdocvqa_pairs(
    question: str,
    answer: str,
    pages: Sequence[str],
    answer_page_index: int,
    neg_keep_prob: float = DEFAULT_NEG_KEEP_PROB,
    seed: int | None = None,
) -> list[PagePair]:
    """Split a multipage question into one positive page pair plus
    negatives subsampled with probability ``neg_keep_prob``."""
    if not 0 <= answer_page_index < len(pages):
        raise IndexError(f"answer page {answer_page_index} out of range for {len(pages)} pages")
    if not 0.0 <= neg_keep_prob <= 1.0:
        raise ValueError(f"neg_keep_prob must be in [0, 1], got {neg_keep_prob}")
    rng = random.Random(seed)
    pairs = []
    for i, page in enumerate(pages):
        if i == answer_page_index:
            pairs.append(PagePair(question, page, answer, "positive"))
        elif rng.random() < neg_keep_prob:
            pairs.append(PagePair(question, page, NO_ANSWER, "negative"))
    return pairs


def _is_no_answer(answer: str) -> bool:
    return answer.strip().lower() == NO_ANSWER


def score_mpdocvqa(page_predictions: Sequence[tuple[str, float]]) -> str:
    """Pick the highest-scoring page answer, skipping no-answer pages."""
    if not page_predictions:
        raise ValueError("need at least one page prediction")
    best = None
    for answer, score in page_predictions:
        if _is_no_answer(answer):
            continue
        if best is None or score > best[1]:
            best = (answer, score)
    return NO_ANSWER if best is None else best[0]
