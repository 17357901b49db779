"""Planar geometry helpers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wastefinder.geometry import (
    circle_ring,
    point_polyline_distance,
    point_segment_distance,
    points_in_polygon,
    polygon_area,
    rasterize_polygon,
    signed_area,
)
from wastefinder.rng import make_rng


def test_unit_square_area():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    assert polygon_area(square) == 1.0
    assert signed_area(square) == 1.0
    assert signed_area(square[::-1]) == -1.0


def test_points_in_polygon_square():
    square = np.array([[0, 0], [4, 0], [4, 4], [0, 4]], float)
    pts = np.array([[2, 2], [5, 2], [-1, -1], [3.9, 3.9]])
    assert points_in_polygon(pts, square).tolist() == [True, False, False, True]


def test_rasterize_circle_covers_center_pixels():
    mask = rasterize_polygon(circle_ring(8, 8, 3, n=64), 16, 16)
    ys, xs = np.mgrid[:16, :16]
    expected = (xs + 0.5 - 8) ** 2 + (ys + 0.5 - 8) ** 2 <= 9
    # a 64-gon underestimates the circle only at the rim
    assert (mask == expected).mean() > 0.97
    assert mask[8, 8]


def test_rasterize_clips_to_bounds():
    mask = rasterize_polygon(circle_ring(0, 0, 3), 8, 8)
    assert mask.shape == (8, 8)
    assert mask.sum() > 0


def test_point_segment_distance_cases():
    assert point_segment_distance(3, 4, 0, 0, 0, 8) == pytest.approx(3.0)
    assert point_segment_distance(0, 9, 0, 0, 0, 8) == pytest.approx(1.0)  # beyond the end
    assert point_segment_distance(5, 5, 5, 5, 5, 5) == 0.0  # degenerate segment


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 100_000))
def test_polyline_distance_matches_per_segment_min(seed):
    r = make_rng(seed)
    coords = r.uniform(-50, 50, (int(r.integers(2, 8)), 2))
    px, py = r.uniform(-60, 60, 2)
    got = point_polyline_distance(px, py, coords)
    brute = min(
        point_segment_distance(px, py, a[0], a[1], b[0], b[1])
        for a, b in zip(coords[:-1], coords[1:])
    )
    assert got == pytest.approx(brute, abs=1e-9)
