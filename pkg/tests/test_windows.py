import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sweepdet import BoundingBox, generate_windows, window_sizes_from_boxes


def box_of_size(size):
    return BoundingBox(0, 0, size, 1 if size > 1 else 2)


class TestWindowSizes:
    def test_mean_and_p75_with_interpolation(self):
        # sizes [10, 20, 30, 40]: mean 25; p75 by linear interpolation
        # between order statistics is 32.5, rounded half-up to 33.
        boxes = [BoundingBox(0, 0, s, s) for s in (10, 20, 30, 40)]
        assert window_sizes_from_boxes(boxes, "mean_and_p75") == [25, 33]

    def test_duplicates_collapse(self):
        boxes = [BoundingBox(0, 0, 50, 50)]
        assert window_sizes_from_boxes(boxes, "mean_and_p75") == [50]

    def test_constant_sizes_mean_scheme(self):
        boxes = [BoundingBox(0, 0, 32, 32)] * 5
        assert window_sizes_from_boxes(boxes, "mean") == [32]

    def test_size_is_longer_side(self):
        boxes = [BoundingBox(0, 0, 10, 40), BoundingBox(0, 0, 40, 10)]
        assert window_sizes_from_boxes(boxes, "mean") == [40]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            window_sizes_from_boxes([], "mean")

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError):
            window_sizes_from_boxes([box_of_size(4)], "median")

    def test_rounding_half_up(self):
        # sizes [10, 11]: mean 10.5 rounds up to 11.
        boxes = [BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 11, 11)]
        assert window_sizes_from_boxes(boxes, "mean") == [11]


def covers_every_pixel(grid, width, height):
    xs = np.zeros(width, dtype=bool)
    ys = np.zeros(height, dtype=bool)
    covered = np.zeros((height, width), dtype=bool)
    for box in grid.windows:
        covered[box.y_min:box.y_max, box.x_min:box.x_max] = True
    return bool(covered.all())


class TestGenerateWindows:
    def test_hand_enumerated_grid(self):
        # 100x100 image, window 50, overlap 0.5: stride 25, positions
        # {0, 25, 50} per axis, 9 windows total.
        grid = generate_windows(100, 100, 50, overlap=0.5)
        assert grid.stride == 25
        assert len(grid) == 9
        xs = sorted({box.x_min for box in grid.windows})
        assert xs == [0, 25, 50]

    def test_window_larger_than_image_clamps(self):
        grid = generate_windows(40, 40, 50, overlap=0.5)
        assert len(grid) == 1
        assert grid.windows[0] == BoundingBox(0, 0, 40, 40)

    def test_exact_tile(self):
        grid = generate_windows(100, 100, 100, overlap=0.0)
        assert len(grid) == 1
        assert grid.windows[0] == BoundingBox(0, 0, 100, 100)

    def test_final_column_snaps_to_edge(self):
        # 90 wide, window 50, stride 25: regular stops at 25, so a
        # snapped window at 40 completes coverage.
        grid = generate_windows(90, 90, 50, overlap=0.5)
        xs = sorted({box.x_min for box in grid.windows})
        assert xs == [0, 25, 40]
        assert covers_every_pixel(grid, 90, 90)

    def test_row_major_order(self):
        grid = generate_windows(60, 60, 30, overlap=0.5)
        keys = [(b.y_min, b.x_min) for b in grid.windows]
        assert keys == sorted(keys)

    @settings(max_examples=120, deadline=None)
    @given(st.integers(1, 160), st.integers(1, 160), st.integers(1, 80),
           st.floats(0.0, 0.95))
    def test_coverage_and_bounds_properties(self, width, height, window, overlap):
        grid = generate_windows(width, height, window, overlap=overlap)
        assert grid.stride <= window
        for box in grid.windows:
            assert 0 <= box.x_min and box.x_max <= width
            assert 0 <= box.y_min and box.y_max <= height
        assert covers_every_pixel(grid, width, height)

    def test_consecutive_overlap_amount(self):
        # stride floor(64 * 0.25) = 16, so neighbors share 48 columns.
        grid = generate_windows(256, 64, 64, overlap=0.75)
        xs = sorted({box.x_min for box in grid.windows})
        for a, b in zip(xs, xs[1:]):
            shared = (a + 64) - b
            assert shared >= int(np.floor(64 * 0.75)) - 1
