import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screentk.patching import aspect_ratio_bucket, compute_grid, fixed_grid, patch_rects


def oracle_grid(width, height, patch, budget):
    """Exhaustive search over integer (rows, cols) with rows * cols <= budget.

    The best pair maximizes the scale min(rows*p/h, cols*p/w); the grid is
    the one that scale actually needs.
    """
    best = Fraction(0)
    for r in range(1, budget + 1):
        c = budget // r
        best = max(best, min(Fraction(r * patch, height), Fraction(c * patch, width)))
    return max(1, math.ceil(best * height / patch)), max(1, math.ceil(best * width / patch))


def test_square_reference_cases():
    g = compute_grid(756, 756, 14, 2916)
    assert (g.rows, g.cols) == (54, 54)
    assert (g.scaled_w, g.scaled_h, g.pad_right, g.pad_bottom) == (756, 756, 0, 0)
    g = compute_grid(812, 812, 14, 3364)
    assert (g.rows, g.cols) == (58, 58)


def test_720_budget_2024():
    g = compute_grid(720, 720, 16, 2024)
    assert g.rows * g.cols <= 2024
    assert max(g.rows, g.cols) in (44, 45)
    assert (g.rows, g.cols) == oracle_grid(720, 720, 16, 2024)


def test_rectangle_matches_oracle():
    g = compute_grid(1000, 500, 14, 2916)
    assert (g.rows, g.cols) == oracle_grid(1000, 500, 14, 2916) == (38, 76)


def test_budget_one():
    for w, h in [(1, 1), (5000, 10), (10, 5000)]:
        g = compute_grid(w, h, 16, 1)
        assert (g.rows, g.cols) == (1, 1)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        compute_grid(10, 10, 16, 0)
    with pytest.raises(ValueError):
        compute_grid(0, 10, 16, 4)
    with pytest.raises(ValueError):
        fixed_grid(16, 0)


def test_random_instances_match_oracle():
    rng = random.Random(99)
    for _ in range(200):
        w, h = rng.randint(1, 3000), rng.randint(1, 3000)
        p, b = rng.choice([8, 14, 16, 32]), rng.randint(1, 200)
        g = compute_grid(w, h, p, b)
        assert (g.rows, g.cols) == oracle_grid(w, h, p, b), (w, h, p, b)


@settings(max_examples=200)
@given(st.integers(1, 4000), st.integers(1, 4000), st.integers(1, 64), st.integers(1, 5000))
def test_grid_invariants(w, h, p, b):
    g = compute_grid(w, h, p, b)
    assert g.rows * g.cols <= b
    assert g.scaled_w + g.pad_right == g.cols * p
    assert g.scaled_h + g.pad_bottom == g.rows * p
    if w == h:
        assert abs(g.rows - g.cols) <= 1


@settings(max_examples=100)
@given(st.integers(1, 2000), st.integers(1, 2000), st.integers(1, 1000))
def test_budget_monotone(w, h, b):
    assert compute_grid(w, h, 16, b + 1).num_patches >= compute_grid(w, h, 16, b).num_patches


def test_scaled_content_keeps_aspect():
    g = compute_grid(1000, 500, 14, 2916)
    assert abs(g.scaled_w / g.scaled_h - 2.0) < 14 / g.scaled_h + 1e-9


@pytest.mark.parametrize("budget,side", [(2025, 45), (1, 1), (2024, 44)])
def test_fixed_grid(budget, side):
    g = fixed_grid(16, budget)
    assert (g.rows, g.cols) == (side, side)
    assert g.scaled_w == g.scaled_h == side * 16


def test_patch_rects_tiling():
    (only,) = patch_rects(fixed_grid(16, 1))
    assert (only.ymin, only.xmin, only.ymax, only.xmax) == (0, 0, 16, 16)
    rects = patch_rects(fixed_grid(10, 4))
    assert len(rects) == 4
    assert sum(r.area for r in rects) == 20 * 20
    assert [(r.ymin, r.xmin) for r in rects] == [(0, 0), (0, 10), (10, 0), (10, 10)]


@given(st.integers(1, 3000), st.integers(1, 3000), st.integers(1, 300))
def test_patch_rects_area(w, h, b):
    g = compute_grid(w, h, 14, b)
    rects = patch_rects(g)
    cw, ch = g.canvas
    assert len(rects) == g.num_patches
    assert sum(r.area for r in rects) == cw * ch


def test_aspect_ratio_bucket():
    assert aspect_ratio_bucket(720, 1280) == "portrait"
    assert aspect_ratio_bucket(1280, 720) == "landscape"
    assert aspect_ratio_bucket(100, 100) == "square"
