"""Patch-grid geometry for variable-resolution and fixed-grid patching.

``compute_grid`` picks the largest aspect-preserving scale whose patch grid
fits the budget; the scaled image is then padded (never stretched) to a
whole number of patches. ``fixed_grid`` is the square baseline that
stretches every image to the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .schema import PixelBox

SCALE_TOL = 1e-6


@dataclass(frozen=True)
class PatchGrid:
    rows: int
    cols: int
    patch_size: int
    scaled_w: int
    scaled_h: int
    pad_right: int = 0
    pad_bottom: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1 or self.patch_size < 1:
            raise ValueError(f"invalid grid {self.rows}x{self.cols} with patch {self.patch_size}")
        if self.scaled_w + self.pad_right != self.cols * self.patch_size:
            raise ValueError("scaled_w + pad_right must equal cols * patch_size")
        if self.scaled_h + self.pad_bottom != self.rows * self.patch_size:
            raise ValueError("scaled_h + pad_bottom must equal rows * patch_size")

    @property
    def num_patches(self) -> int:
        return self.rows * self.cols

    @property
    def canvas(self) -> tuple[int, int]:
        """(width, height) of the padded canvas."""
        return self.cols * self.patch_size, self.rows * self.patch_size

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "patch_size": self.patch_size,
            "num_patches": self.num_patches,
            "scaled_w": self.scaled_w,
            "scaled_h": self.scaled_h,
            "pad_right": self.pad_right,
            "pad_bottom": self.pad_bottom,
        }


def _cells(s, extent: int, patch: int) -> int:
    return max(1, math.ceil(s * extent / patch))


def _fits(s, width: int, height: int, patch: int, budget: int) -> bool:
    return _cells(s, height, patch) * _cells(s, width, patch) <= budget


def compute_grid(width: int, height: int, patch_size: int, budget: int) -> PatchGrid:
    """Largest aspect-preserving grid with rows * cols <= budget."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if width <= 0 or height <= 0 or patch_size <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height} patch {patch_size}")

    # lo always fits; hi never does (one side alone would need > budget cells)
    lo = 0.0
    hi = (budget + 1) * patch_size / min(width, height)
    for _ in range(200):
        if hi - lo <= SCALE_TOL * hi:
            break
        mid = (lo + hi) / 2
        if _fits(Fraction(mid), width, height, patch_size, budget):
            lo = mid
        else:
            hi = mid

    # Snap to the exact breakpoint with rational arithmetic, then walk past
    # any breakpoints the float search could not resolve.
    rows = _cells(Fraction(lo), height, patch_size) if lo > 0 else 1
    cols = _cells(Fraction(lo), width, patch_size) if lo > 0 else 1
    scale = min(Fraction(rows * patch_size, height), Fraction(cols * patch_size, width))
    while True:
        up_rows = math.floor(scale * height / patch_size) + 1
        up_cols = math.floor(scale * width / patch_size) + 1
        if up_rows * up_cols > budget:
            break
        scale = min(Fraction(up_rows * patch_size, height), Fraction(up_cols * patch_size, width))

    rows = _cells(scale, height, patch_size)
    cols = _cells(scale, width, patch_size)
    scaled_h = min(rows * patch_size, max(1, round(scale * height)))
    scaled_w = min(cols * patch_size, max(1, round(scale * width)))
    return PatchGrid(
        rows=rows,
        cols=cols,
        patch_size=patch_size,
        scaled_w=scaled_w,
        scaled_h=scaled_h,
        pad_right=cols * patch_size - scaled_w,
        pad_bottom=rows * patch_size - scaled_h,
    )


def fixed_grid(patch_size: int, budget: int) -> PatchGrid:
    """Square grid of side floor(sqrt(budget)); images are stretched onto it."""
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    side = math.isqrt(budget)
    return PatchGrid(side, side, patch_size, side * patch_size, side * patch_size)


def patch_rects(g: PatchGrid) -> list[PixelBox]:
    """Row-major tiling of the padded canvas."""
    p = g.patch_size
    return [
        PixelBox(r * p, c * p, (r + 1) * p, (c + 1) * p)
        for r in range(g.rows)
        for c in range(g.cols)
    ]


def aspect_ratio_bucket(width: float, height: float) -> str:
    if width <= 0 or height <= 0:
        raise ValueError(f"dimensions must be positive, got {width}x{height}")
    ratio = width / height
    if ratio > 1.0:
        return "landscape"
    if ratio < 1.0:
        return "portrait"
    return "square"
