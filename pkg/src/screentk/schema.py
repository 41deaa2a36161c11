"""Screen schema data model and its text grammar.

A schema is a forest of UI elements. Each element has an uppercase class
name, an optional payload (OCR text, icon name or caption), a bounding box
in bucketized 0-999 coordinates, and an optional parenthesized block of
children::

    BUTTON "OK" 0 0 99 99 ( TEXT "OK" 10 10 90 90 )

Masked payloads are written as the bare token ``<mask>``.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

NUM_BUCKETS = 1000
MAX_COORD = NUM_BUCKETS - 1
MASK_TOKEN = "<mask>"

# Serialization orders for the four coordinates of a box.
ORDERS = {
    "yxyx": ("ymin", "xmin", "ymax", "xmax"),
    "xyxy": ("xmin", "ymin", "xmax", "ymax"),
}
DEFAULT_ORDER = "yxyx"

CLASS_RE = re.compile(r"[A-Z][A-Z0-9_]*\Z")

_registry: set[str] = {"IMAGE", "PICTOGRAM", "BUTTON", "TEXT"}


def register_class(name: str) -> str:
    """Add ``name`` to the element-class registry and return it."""
    if not CLASS_RE.match(name):
        raise ValueError(f"invalid element class {name!r}")
    _registry.add(name)
    return name


def known_classes() -> frozenset[str]:
    return frozenset(_registry)


class SchemaError(ValueError):
    """Raised for malformed schema text or invalid schema values.

    ``kind`` is one of ``lexical``, ``syntax``, ``range``, ``order``,
    ``unbalanced``, ``payload`` or ``class``; ``offset`` is the byte offset
    into the UTF-8 encoded input (``None`` for non-textual errors).
    """

    def __init__(self, kind: str, message: str, offset: int | None = None):
        self.kind = kind
        self.message = message
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{kind} error{where}: {message}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "offset": self.offset, "message": self.message}


@dataclass(frozen=True)
class QuantBox:
    ymin: int
    xmin: int
    ymax: int
    xmax: int

    def __post_init__(self):
        for name in ("ymin", "xmin", "ymax", "xmax"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= MAX_COORD:
                raise SchemaError("range", f"{name}={v!r} outside 0..{MAX_COORD}")
        if self.ymax < self.ymin:
            raise SchemaError("order", f"ymax {self.ymax} < ymin {self.ymin}")
        if self.xmax < self.xmin:
            raise SchemaError("order", f"xmax {self.xmax} < xmin {self.xmin}")

    @property
    def area(self) -> int:
        return (self.ymax - self.ymin) * (self.xmax - self.xmin)

    def coords(self, order: str = DEFAULT_ORDER) -> tuple[int, int, int, int]:
        return tuple(getattr(self, name) for name in ORDERS[order])

    @classmethod
    def from_coords(cls, coords: Sequence[int], order: str = DEFAULT_ORDER) -> "QuantBox":
        return cls(**dict(zip(ORDERS[order], coords)))


@dataclass(frozen=True)
class PixelBox:
    ymin: float
    xmin: float
    ymax: float
    xmax: float

    def __post_init__(self):
        vals = (self.ymin, self.xmin, self.ymax, self.xmax)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"pixel box coordinates must be finite and >= 0: {vals}")
        if self.ymax < self.ymin or self.xmax < self.xmin:
            raise ValueError(f"pixel box min exceeds max: {vals}")

    @property
    def area(self) -> float:
        return (self.ymax - self.ymin) * (self.xmax - self.xmin)

    @property
    def center(self) -> tuple[float, float]:
        return (self.ymin + self.ymax) / 2, (self.xmin + self.xmax) / 2


@dataclass(frozen=True)
class UiElement:
    cls: str
    box: QuantBox
    payload: str | None = None
    children: tuple["UiElement", ...] = ()
    masked: bool = False

    def __post_init__(self):
        if not CLASS_RE.match(self.cls):
            raise SchemaError("class", f"invalid element class {self.cls!r}")
        if self.payload is not None and not self.payload.strip():
            raise SchemaError("payload", "payload must be non-empty after trimming")
        if self.masked and self.payload != MASK_TOKEN:
            raise SchemaError("payload", "masked element must carry the mask token")
        if not isinstance(self.children, tuple):
            object.__setattr__(self, "children", tuple(self.children))

    def walk(self) -> Iterator["UiElement"]:
        """Pre-order traversal of this element and its descendants."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ScreenSchema:
    elements: tuple[UiElement, ...] = ()
    source_dims: tuple[int, int] | None = field(default=None)

    def __post_init__(self):
        if not isinstance(self.elements, tuple):
            object.__setattr__(self, "elements", tuple(self.elements))

    def walk(self) -> Iterator[UiElement]:
        for el in self.elements:
            yield from el.walk()

    def __len__(self) -> int:
        return sum(1 for _ in self.walk())


# -- quantization -----------------------------------------------------------


def _quantize_coord(c: float, extent: float) -> int:
    return min(max(math.floor(c / extent * NUM_BUCKETS), 0), MAX_COORD)


def quantize_box(b: PixelBox, width: float, height: float) -> QuantBox:
    """Map a pixel box to 0-999 buckets: floor(c / extent * 1000), clamped."""
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    if b.xmax > width or b.ymax > height:
        raise ValueError(f"box {b} exceeds image extent {width}x{height}")
    return QuantBox(
        _quantize_coord(b.ymin, height),
        _quantize_coord(b.xmin, width),
        _quantize_coord(b.ymax, height),
        _quantize_coord(b.xmax, width),
    )


def dequantize_box(q: QuantBox, width: float, height: float) -> PixelBox:
    """Map each bucket to its center in pixel space."""
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    return PixelBox(
        (q.ymin + 0.5) / NUM_BUCKETS * height,
        (q.xmin + 0.5) / NUM_BUCKETS * width,
        (q.ymax + 0.5) / NUM_BUCKETS * height,
        (q.xmax + 0.5) / NUM_BUCKETS * width,
    )


# -- parsing ----------------------------------------------------------------

_WS = " \t\r\n"
MAX_DEPTH = 200
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n"}


def _is_word_char(ch: str) -> bool:
    return ch.isascii() and (ch.isalnum() or ch == "_")


class _Parser:
    def __init__(self, text: str, order: str, strict_classes: bool):
        self.text = text
        self.pos = 0
        self.order = order
        self.strict_classes = strict_classes

    def offset(self, i: int) -> int:
        if self.text.isascii():
            return i
        return len(self.text[:i].encode("utf-8"))

    def error(self, kind: str, message: str, at: int | None = None) -> SchemaError:
        return SchemaError(kind, message, self.offset(self.pos if at is None else at))

    def skip_ws(self) -> None:
        n = len(self.text)
        while self.pos < n and self.text[self.pos] in _WS:
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def parse_forest(self, depth: int) -> list[UiElement]:
        elements = []
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == "":
                if depth > 0:
                    raise self.error("unbalanced", "missing ')'")
                return elements
            if ch == ")":
                if depth == 0:
                    raise self.error("unbalanced", "unexpected ')'")
                return elements
            elements.append(self.parse_element(depth))

    def parse_element(self, depth: int) -> UiElement:
        start = self.pos
        cls = self.read_class()
        self.expect_ws()
        payload = None
        masked = False
        if self.peek() == '"':
            payload = self.read_string()
            self.expect_ws()
        elif self.text.startswith(MASK_TOKEN, self.pos):
            self.pos += len(MASK_TOKEN)
            payload, masked = MASK_TOKEN, True
            self.expect_ws()
        coords = []
        for i in range(4):
            if i:
                self.expect_ws()
            coords.append(self.read_int())
        values = dict(zip(ORDERS[self.order], coords))
        if values["ymax"] < values["ymin"]:
            raise self.error("order", f"ymax {values['ymax']} < ymin {values['ymin']}", start)
        if values["xmax"] < values["xmin"]:
            raise self.error("order", f"xmax {values['xmax']} < xmin {values['xmin']}", start)
        box = QuantBox(**values)
        children: list[UiElement] = []
        save = self.pos
        self.skip_ws()
        if self.peek() == "(":
            if save == self.pos:
                raise self.error("syntax", "expected whitespace before '('")
            if depth >= MAX_DEPTH:
                raise self.error("syntax", f"nesting deeper than {MAX_DEPTH}")
            self.pos += 1
            children = self.parse_forest(depth + 1)
            self.pos += 1  # the closing ')'
        else:
            self.pos = save
        return UiElement(cls, box, payload, tuple(children), masked)

    def expect_ws(self) -> None:
        if self.peek() == "" or self.peek() not in _WS:
            got = self.peek() or "end of input"
            raise self.error("syntax", f"expected whitespace, got {got!r}")
        self.skip_ws()

    def read_class(self) -> str:
        start = self.pos
        n = len(self.text)
        while self.pos < n and _is_word_char(self.text[self.pos]):
            self.pos += 1
        word = self.text[start:self.pos]
        if not word:
            raise self.error("lexical", f"unexpected character {self.peek()!r}", start)
        if not CLASS_RE.match(word):
            raise self.error("lexical", f"invalid class name {word!r}", start)
        if self.strict_classes and word not in _registry:
            raise self.error("class", f"unregistered element class {word!r}", start)
        return word

    def read_string(self) -> str:
        start = self.pos
        self.pos += 1
        out = []
        n = len(self.text)
        while True:
            if self.pos >= n:
                raise self.error("lexical", "unterminated string", start)
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                break
            if ch == "\\":
                nxt = self.text[self.pos + 1] if self.pos + 1 < n else ""
                if nxt not in _ESCAPES:
                    raise self.error("lexical", f"invalid escape \\{nxt}")
                out.append(_ESCAPES[nxt])
                self.pos += 2
                continue
            out.append(ch)
            self.pos += 1
        value = "".join(out)
        if not value.strip():
            raise self.error("payload", "payload must be non-empty after trimming", start)
        return value

    def read_int(self) -> int:
        start = self.pos
        n = len(self.text)
        while self.pos < n and self.text[self.pos] in "0123456789":
            self.pos += 1
        digits = self.text[start:self.pos]
        if not digits:
            got = self.peek() or "end of input"
            raise self.error("syntax", f"expected integer, got {got!r}", start)
        if len(digits) > 1 and digits[0] == "0":
            raise self.error("lexical", f"leading zero in {digits!r}", start)
        value = int(digits)
        if value > MAX_COORD:
            raise self.error("range", f"coordinate {value} outside 0..{MAX_COORD}", start)
        return value


def parse_schema(text: str, *, order: str = DEFAULT_ORDER, strict_classes: bool = False) -> ScreenSchema:
    """Parse schema text into a ScreenSchema.

    Raises SchemaError carrying the byte offset of the first problem.
    With ``strict_classes`` unregistered class names are rejected.
    """
    if order not in ORDERS:
        raise ValueError(f"unknown coordinate order {order!r}")
    parser = _Parser(text, order, strict_classes)
    return ScreenSchema(tuple(parser.parse_forest(0)))


# -- serialization ----------------------------------------------------------


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _serialize_element(el: UiElement, order: str, out: list[str]) -> None:
    out.append(el.cls)
    if el.masked:
        out.append(MASK_TOKEN)
    elif el.payload is not None:
        out.append(_quote(el.payload))
    out.extend(str(c) for c in el.box.coords(order))
    if el.children:
        out.append("(")
        for child in el.children:
            _serialize_element(child, order, out)
        out.append(")")


def serialize_schema(s: ScreenSchema, *, order: str = DEFAULT_ORDER) -> str:
    """Canonical single-space-separated text form of ``s``."""
    out: list[str] = []
    for el in s.elements:
        _serialize_element(el, order, out)
    return " ".join(out)


# -- transforms -------------------------------------------------------------


def _is_maskable(el: UiElement) -> bool:
    return el.cls == "TEXT" and el.payload is not None and not el.masked


def mask_text_elements(s: ScreenSchema, fraction: float, seed: int | None = None) -> ScreenSchema:
    """Mask floor(fraction * N) TEXT payloads chosen by a seeded generator."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    candidates = [i for i, el in enumerate(s.walk()) if _is_maskable(el)]
    # round before flooring so 0.29 * 100 yields 29, not 28
    k = math.floor(round(fraction * len(candidates), 9))
    chosen = set(random.Random(seed).sample(candidates, k))
    counter = iter(range(len(s)))

    def rebuild(el: UiElement) -> UiElement:
        idx = next(counter)
        children = tuple(rebuild(c) for c in el.children)
        if idx in chosen:
            return replace(el, payload=MASK_TOKEN, masked=True, children=children)
        return replace(el, children=children) if children != el.children else el

    return replace(s, elements=tuple(rebuild(el) for el in s.elements))


def schema_to_detections(s: ScreenSchema) -> list[tuple[str, QuantBox]]:
    """Flatten a schema into (class, box) pairs in pre-order."""
    return [(el.cls, el.box) for el in s.walk()]
