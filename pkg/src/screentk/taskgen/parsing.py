"""Lenient parsing of LLM completions into QA pairs, navigation samples,
summaries and rephrase lists.

Completions often wrap their JSON in prose, so the parsers look for the
first JSON value in the text that has the expected shape.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from typing import Iterator

from ..schema import DEFAULT_ORDER, ORDERS, QuantBox


class ResponseParseError(ValueError):
    pass


@dataclass(frozen=True)
class QaPair:
    question: str
    answer: str

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty")


@dataclass(frozen=True)
class NavigationSample:
    instruction: str
    coords: tuple[int, int, int, int]
    # None only when parsed with order="raw"
    target: QuantBox | None

    def target_text(self) -> str:
        return "click " + " ".join(str(c) for c in self.coords)


_decoder = json.JSONDecoder()


def iter_json_values(text: str) -> Iterator[object]:
    """Every JSON object/array that decodes starting at a '{' or '['."""
    for i, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = _decoder.raw_decode(text, i)
            except (ValueError, RecursionError):
                continue
            yield value
    # bare `"key": value` bodies, as the prompts themselves illustrate
    body = text.strip().rstrip(",")
    if body and body[0] not in "{[":
        try:
            yield json.loads("{" + body + "}")
        except (ValueError, RecursionError):
            pass


def _entries(text: str, key: str = "questions") -> list:
    for value in iter_json_values(text):
        if isinstance(value, dict) and isinstance(value.get(key), list):
            return value[key]
        if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            return value
    raise ResponseParseError(f"no JSON with a {key!r} list found")


def split_qa(text: str) -> tuple[list[QaPair], int]:
    """Valid QA pairs and the number of malformed entries."""
    pairs, bad = [], 0
    for entry in _entries(text):
        q = entry.get("question") if isinstance(entry, dict) else None
        a = entry.get("answer") if isinstance(entry, dict) else None
        if isinstance(a, (int, float)) and not isinstance(a, bool):
            a = str(a)
        if isinstance(q, str) and isinstance(a, str) and q.strip() and a.strip():
            pairs.append(QaPair(q.strip(), a.strip()))
        else:
            bad += 1
    return pairs, bad


def parse_qa_response(text: str) -> list[QaPair]:
    pairs, bad = split_qa(text)
    if bad:
        raise ResponseParseError(f"{bad} entries missing a non-empty question or answer")
    return pairs


_CLICK = re.compile(r"`?\s*click\s+([0-9]+)\s+([0-9]+)\s+([0-9]+)\s+([0-9]+)\s*`?\Z")


def _nav_entry(entry, order: str) -> NavigationSample | None:
    if not isinstance(entry, dict):
        return None
    q, a = entry.get("question"), entry.get("answer")
    if not isinstance(q, str) or not q.strip() or not isinstance(a, str):
        return None
    m = _CLICK.match(a.strip())
    if not m:
        return None
    coords = tuple(int(g) for g in m.groups())
    if any(c > 999 for c in coords):
        return None
    if order == "raw":
        return NavigationSample(q.strip(), coords, None)
    named = dict(zip(ORDERS[order], coords))
    if named["ymax"] < named["ymin"] or named["xmax"] < named["xmin"]:
        return None
    return NavigationSample(q.strip(), coords, QuantBox(**named))


def split_nav(text: str, order: str = DEFAULT_ORDER) -> tuple[list[NavigationSample], int]:
    """Valid navigation samples and the number of rejected entries.

    ``order`` names the coordinate order used for validation; ``"raw"``
    keeps the four numbers without checking box geometry.
    """
    if order != "raw" and order not in ORDERS:
        raise ValueError(f"unknown coordinate order {order!r}")
    samples, bad = [], 0
    for entry in _entries(text):
        s = _nav_entry(entry, order)
        if s is None:
            bad += 1
        else:
            samples.append(s)
    return samples, bad


def parse_nav_response(text: str, order: str = DEFAULT_ORDER) -> list[NavigationSample]:
    samples, _ = split_nav(text, order)
    if not samples:
        raise ResponseParseError("no valid navigation entries")
    return samples


def parse_summary_response(text: str) -> str:
    for value in iter_json_values(text):
        if isinstance(value, dict) and isinstance(value.get("summary"), str) and value["summary"].strip():
            return value["summary"].strip()
    raise ResponseParseError("no non-empty 'summary' field found")


def _bracketed(text: str) -> Iterator[str]:
    """Flat [...] spans, skipping brackets inside quoted strings.

    A list of strings never nests, so a span is abandoned at the first
    unquoted inner '['; this keeps the scan linear on bracket-heavy input.
    """
    for start, ch in enumerate(text):
        if ch != "[":
            continue
        quote, i = None, start + 1
        while i < len(text):
            c = text[i]
            if quote:
                if c == "\\":
                    i += 1
                elif c == quote:
                    quote = None
            elif c in "'\"":
                quote = c
            elif c == "[":
                break
            elif c == "]":
                yield text[start:i + 1]
                break
            i += 1


def parse_rephrase_response(text: str) -> list[str]:
    """First bracketed list of strings, stripped and deduplicated in order."""
    for span in _bracketed(text):
        try:
            value = ast.literal_eval(span)
        except (ValueError, TypeError, SyntaxError, MemoryError, RecursionError):
            continue
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            continue
        out: list[str] = []
        for v in value:
            v = v.strip()
            if v and v not in out:
                out.append(v)
        if out:
            return out
    raise ResponseParseError("no bracketed list of strings found")
