#!/usr/bin/env python3
"""
Tests for planar geometry: polygons, hulls, poses, grids, paths and swaths
"""

import math

import numpy as np
import pytest

from app.core.errors import ConfigError, DegenerateInput
from app.core.geometry import (ConvexPolygon, GridSpec, PlannedPath, Point2, Pose, ShipFootprint, cells_to_set,
                               convex_hull, polygon_inertia, polygon_properties, rasterize_polygon, swath_trace,
                               wrap_angle, wrap_to_pi)


class TestAngles:
    """Angle wrapping"""

    def test_wrap_angle_range(self):
        values = np.linspace(-20.0, 20.0, 401)
        wrapped = wrap_angle(values)
        assert np.all(wrapped >= 0.0)
        assert np.all(wrapped < 2.0 * math.pi)

    def test_wrap_angle_full_turn_is_zero(self):
        assert wrap_angle(2.0 * math.pi) == 0.0
        assert wrap_angle(-2.0 * math.pi) == 0.0

    def test_wrap_to_pi(self):
        assert wrap_to_pi(3.0 * math.pi / 2.0) == pytest.approx(-math.pi / 2.0)
        assert wrap_to_pi(math.pi) == pytest.approx(math.pi)
        assert wrap_to_pi(-math.pi) == pytest.approx(math.pi)

    def test_pose_wraps_heading(self):
        pose = Pose(1.0, 2.0, -math.pi / 2.0)
        assert pose.psi == pytest.approx(3.0 * math.pi / 2.0)


class TestConvexPolygon:
    """Polygon construction and properties"""

    def test_clockwise_input_is_reoriented(self):
        poly = ConvexPolygon(np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=float))
        assert polygon_properties(poly).area == pytest.approx(1.0)

    def test_closing_vertex_and_duplicates_dropped(self):
        poly = ConvexPolygon(np.array([[0, 0], [2, 0], [2, 0], [2, 2], [0, 2], [0, 0]], dtype=float))
        assert len(poly) == 4

    def test_collinear_vertex_removed(self):
        poly = ConvexPolygon(np.array([[0, 0], [1, 0], [2, 0], [2, 2], [0, 2]], dtype=float))
        assert len(poly) == 4

    def test_collinear_points_rejected(self):
        with pytest.raises(DegenerateInput):
            ConvexPolygon(np.array([[0, 0], [1, 1], [2, 2]], dtype=float))

    def test_non_convex_rejected(self):
        with pytest.raises(DegenerateInput):
            ConvexPolygon(np.array([[0, 0], [4, 0], [1, 1], [0, 4]], dtype=float))

    def test_unit_square_properties(self):
        props = polygon_properties(ConvexPolygon(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)))
        assert props.area == pytest.approx(1.0)
        assert props.centroid.x == pytest.approx(0.5)
        assert props.centroid.y == pytest.approx(0.5)
        assert props.bounding_radius == pytest.approx(math.sqrt(0.5))

    def test_square_inertia(self):
        poly = ConvexPolygon(np.array([[0, 0], [2, 0], [2, 2], [0, 2]], dtype=float))
        # m(a² + b²)/12
        assert polygon_inertia(poly, 3.0) == pytest.approx(3.0 * 8.0 / 12.0)

    def test_scaled_about_centroid_keeps_centroid(self):
        poly = ConvexPolygon(np.array([[0, 0], [4, 0], [4, 2], [0, 2]], dtype=float))
        bigger = poly.scaled(1.5)
        assert polygon_properties(bigger).area == pytest.approx(8.0 * 2.25)
        assert polygon_properties(bigger).centroid.x == pytest.approx(2.0)

    def test_transformed_rotates_and_translates(self):
        poly = ConvexPolygon(np.array([[0, 0], [2, 0], [0, 1]], dtype=float))
        moved = poly.transformed(Pose(10.0, 0.0, math.pi / 2.0))
        assert np.allclose(sorted(map(tuple, np.round(moved.vertices, 9))),
                           sorted([(10.0, 0.0), (10.0, 2.0), (9.0, 0.0)]))


class TestConvexHull:
    """Minimal hull of point sets"""

    def test_interior_points_dropped(self):
        hull = convex_hull([[0, 0], [3, 0], [3, 3], [0, 3], [1, 1], [2, 1.5]])
        assert len(hull) == 4
        assert polygon_properties(hull).area == pytest.approx(9.0)

    def test_too_few_points(self):
        with pytest.raises(DegenerateInput):
            convex_hull([[0, 0], [1, 0]])

    def test_collinear_points(self):
        with pytest.raises(DegenerateInput):
            convex_hull([[0, 0], [1, 0], [2, 0], [3, 0]])


class TestGridAndRaster:
    """Grids and rasterisation"""

    def test_covering_shape(self):
        grid = GridSpec.covering(0.0, 0.0, 10.0, 4.0, 1.0)
        assert grid.shape == (4, 10)
        assert grid.x_max == pytest.approx(10.0)

    def test_non_positive_resolution(self):
        with pytest.raises(ConfigError):
            GridSpec(0.0, 2, 2)

    def test_cell_aligned_square(self):
        grid = GridSpec(1.0, 10, 10, Point2(0.0, 0.0))
        cells = rasterize_polygon(ConvexPolygon(np.array([[2, 3], [4, 3], [4, 5], [2, 5]], dtype=float)), grid)
        assert cells_to_set(cells) == {(3, 2), (3, 3), (4, 2), (4, 3)}

    def test_edge_touching_cells_excluded(self):
        grid = GridSpec(1.0, 10, 10, Point2(0.0, 0.0))
        cells = rasterize_polygon(ConvexPolygon(np.array([[2, 2], [3, 2], [3, 3], [2, 3]], dtype=float)), grid)
        assert cells_to_set(cells) == {(2, 2)}

    def test_off_grid_polygon(self):
        grid = GridSpec(1.0, 5, 5)
        cells = rasterize_polygon(ConvexPolygon(np.array([[20, 20], [21, 20], [21, 21]], dtype=float)), grid)
        assert len(cells) == 0


class TestPlannedPath:
    """Arc length, interpolation and truncation"""

    @pytest.fixture
    def path(self):
        return PlannedPath(np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [20.0, 0.0, 0.0]]))

    def test_length(self, path):
        assert path.length == pytest.approx(20.0)

    def test_interpolate_clamps(self, path):
        out = path.interpolate([-5.0, 5.0, 50.0])
        assert out[:, 0] == pytest.approx([0.0, 5.0, 20.0])

    def test_truncate_at_x(self, path):
        cut = path.truncate_at_x(15.0)
        assert cut.end.x == pytest.approx(15.0)
        assert cut.length == pytest.approx(15.0)

    def test_truncate_beyond_end_is_noop(self, path):
        assert path.truncate_at_x(30.0) is path

    def test_resample_spacing(self, path):
        resampled = path.resample(3.0)
        steps = np.diff(resampled.arc_lengths())
        assert np.all(steps <= 3.0 + 1e-9)

    def test_empty_poses_rejected(self):
        with pytest.raises(DegenerateInput):
            PlannedPath(np.zeros((0, 3)))


class TestSwath:
    """Footprint placement and swath rasterisation"""

    def test_footprint_origin_inside(self):
        fp = ShipFootprint.default(20.0, 6.0, 4.0)
        assert fp.at(Pose(0.0, 0.0, 0.0)).contains(fp.at(Pose(0.0, 0.0, 0.0)).centroid)

    def test_footprint_origin_outside_rejected(self):
        outline = ConvexPolygon(np.array([[1, 1], [3, 1], [3, 3], [1, 3]], dtype=float))
        with pytest.raises(ConfigError):
            ShipFootprint(outline, 2.0, 2.0)

    def test_straight_swath_covers_band(self):
        fp = ShipFootprint.default(10.0, 4.0, 2.0)
        grid = GridSpec(1.0, 20, 60)
        path = PlannedPath(np.array([[10.0, 10.0, 0.0], [40.0, 10.0, 0.0]]))
        cells = cells_to_set(swath_trace(path, fp, grid))
        rows = {r for r, _ in cells}
        assert rows == {8, 9, 10, 11}
        cols = {c for _, c in cells}
        assert min(cols) == 5
        assert max(cols) == 44
