"""Assemble a screen schema from detector, OCR and captioner outputs."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .schema import PixelBox, QuantBox, ScreenSchema, UiElement, quantize_box

CONTAIN_THRESHOLD = 0.9
CAPTIONED_CLASSES = frozenset({"IMAGE", "PICTOGRAM"})


@dataclass(frozen=True)
class Detection:
    cls: str
    box: PixelBox
    score: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class OcrWord:
    text: str
    box: PixelBox

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("OCR word text must be non-empty")


@dataclass(frozen=True)
class CaptionAnnotation:
    text: str
    box: PixelBox

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("caption text must be non-empty")


def _sort_key(el: UiElement):
    b = el.box
    return (b.ymin, b.xmin, b.ymax, b.xmax, el.cls, el.payload or "", el.masked)


def reading_order(elements: Iterable[UiElement]) -> list[UiElement]:
    """Sort top-to-bottom then left-to-right.

    Ties on (ymin, xmin) fall back to the remaining box coordinates and the
    element content so the result does not depend on input order.
    """
    return sorted(elements, key=_sort_key)


def _intersection(a: QuantBox, b: QuantBox) -> int:
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    return max(h, 0) * max(w, 0)


def _contains(outer: QuantBox, inner: QuantBox, threshold: float) -> bool:
    if inner.area == 0:
        return (outer.ymin <= inner.ymin and inner.ymax <= outer.ymax
                and outer.xmin <= inner.xmin and inner.xmax <= outer.xmax)
    return _intersection(outer, inner) >= threshold * inner.area


def nest_by_containment(elements: Sequence[UiElement], threshold: float = CONTAIN_THRESHOLD) -> ScreenSchema:
    """Build a forest where each element hangs under its smallest container.

    A is a candidate parent of B when A's box covers at least ``threshold``
    of B's area. To keep the result acyclic a parent must also be strictly
    larger than the child, or equally large and earlier in the input.
    """
    n = len(elements)
    parent = [-1] * n
    for j, child in enumerate(elements):
        best = -1
        for i, cand in enumerate(elements):
            if i == j:
                continue
            a_area, b_area = cand.box.area, child.box.area
            if a_area < b_area or (a_area == b_area and i > j):
                continue
            if not _contains(cand.box, child.box, threshold):
                continue
            if best < 0 or a_area < elements[best].box.area:
                best = i
        parent[j] = best

    kids: list[list[int]] = [[] for _ in range(n)]
    roots = []
    for j, p in enumerate(parent):
        (roots if p < 0 else kids[p]).append(j)

    def build(i: int) -> UiElement:
        children = reading_order(build(k) for k in kids[i])
        return replace(elements[i], children=tuple(children))

    return ScreenSchema(tuple(reading_order(build(r) for r in roots)))


def _check_extent(box: PixelBox, width: float, height: float, what: str) -> None:
    if box.xmax > width or box.ymax > height:
        raise ValueError(f"{what} box {box} exceeds image extent {width}x{height}")


def _pixel_iou(a: PixelBox, b: PixelBox) -> float:
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    inter = max(h, 0.0) * max(w, 0.0)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def _center_inside(word: PixelBox, box: PixelBox) -> bool:
    cy, cx = word.center
    return box.ymin <= cy <= box.ymax and box.xmin <= cx <= box.xmax


def compose_schema(
    dets: Sequence[Detection],
    ocr: Sequence[OcrWord],
    caps: Sequence[CaptionAnnotation],
    width: float,
    height: float,
    *,
    threshold: float = CONTAIN_THRESHOLD,
) -> ScreenSchema:
    """Combine detections, OCR words and captions into one schema.

    Captions go to the IMAGE/PICTOGRAM detection they overlap most (one
    caption per element, highest IoU wins). Each OCR word then attaches to
    the smallest uncaptioned detection containing its center; words with no
    container become TEXT roots. Captions overlapping no eligible element
    are dropped.
    """
    if width <= 0 or height <= 0:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    for d in dets:
        _check_extent(d.box, width, height, "detection")
    for w in ocr:
        _check_extent(w.box, width, height, "OCR word")
    for c in caps:
        _check_extent(c.box, width, height, "caption")

    # element index -> (iou, caption index)
    caption_of: dict[int, tuple[float, int]] = {}
    for ci, cap in enumerate(caps):
        best, best_iou = -1, 0.0
        for di, det in enumerate(dets):
            if det.cls not in CAPTIONED_CLASSES:
                continue
            v = _pixel_iou(cap.box, det.box)
            if v > best_iou:
                best, best_iou = di, v
        if best >= 0 and (best not in caption_of or best_iou > caption_of[best][0]):
            caption_of[best] = (best_iou, ci)

    words_of: dict[int, list[OcrWord]] = {}
    loose: list[OcrWord] = []
    for word in ocr:
        best = -1
        for di, det in enumerate(dets):
            if di in caption_of or not _center_inside(word.box, det.box):
                continue
            if best < 0 or det.box.area < dets[best].box.area:
                best = di
        if best < 0:
            loose.append(word)
        else:
            words_of.setdefault(best, []).append(word)

    flat = []
    for di, det in enumerate(dets):
        payload = None
        if di in caption_of:
            payload = caps[caption_of[di][1]].text
        elif di in words_of:
            ordered = sorted(words_of[di], key=lambda w: (w.box.ymin, w.box.xmin))
            payload = " ".join(w.text for w in ordered)
        flat.append(UiElement(det.cls, quantize_box(det.box, width, height), payload))

    forest = nest_by_containment(flat, threshold)
    text_roots = [UiElement("TEXT", quantize_box(w.box, width, height), w.text) for w in loose]
    roots = reading_order(list(forest.elements) + text_roots)
    return ScreenSchema(tuple(roots), source_dims=(int(width), int(height)))
