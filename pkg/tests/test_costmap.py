#!/usr/bin/env python3
"""
Tests for the collision costmap, swath costs and the smooth cost field
"""

import numpy as np
import pytest

from app.core.errors import ConfigError, DomainError
from app.core.geometry import GridSpec
from app.models.schemas import CostmapConfig
from app.planners.costmap import (Costmap, build_costmap, concentration_penalty, cost_field, ke_loss,
                                  save_costmap, swath_cost)

from conftest import make_field, square

M_SHIP = 6.0e6
U_NOM = 2.0


def two_body_ke_loss(d, r, m_ice, m_ship, U):
    """Ship loss in a perfectly inelastic head-on exchange, scaled by the off-centre fraction"""
    v_common = m_ship * U / (m_ship + m_ice)
    return 0.5 * m_ship * (U ** 2 - v_common ** 2) * (r ** 2 - d ** 2) / r ** 2


class TestKeLoss:
    """Kinetic energy loss of a ship-floe impact"""

    def test_reference_value(self):
        assert ke_loss(0.0, 5.0, 1.0e5, M_SHIP, U_NOM) == pytest.approx(3.90e5, rel=1e-3)

    def test_matches_two_body_exchange(self):
        for d in (0.0, 1.0, 2.5, 4.0):
            expected = two_body_ke_loss(d, 5.0, 1.0e5, M_SHIP, U_NOM)
            assert ke_loss(d, 5.0, 1.0e5, M_SHIP, U_NOM) == pytest.approx(expected, rel=1e-9)

    def test_zero_at_rim(self):
        assert ke_loss(5.0, 5.0, 1.0e5, M_SHIP, U_NOM) == 0.0

    def test_zero_at_rest(self):
        assert ke_loss(1.0, 5.0, 1.0e5, M_SHIP, 0.0) == 0.0

    def test_decreases_with_offset(self):
        values = [ke_loss(d, 5.0, 1.0e5, M_SHIP, U_NOM) for d in np.linspace(0.0, 5.0, 11)]
        assert all(a >= b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("args", [
        (6.0, 5.0, 1.0e5, M_SHIP, U_NOM),
        (-1.0, 5.0, 1.0e5, M_SHIP, U_NOM),
        (0.0, 0.0, 1.0e5, M_SHIP, U_NOM),
        (0.0, 5.0, -1.0, M_SHIP, U_NOM),
        (0.0, 5.0, 1.0e5, M_SHIP, -1.0),
    ])
    def test_domain_errors(self, args):
        with pytest.raises(DomainError):
            ke_loss(*args)


class TestConcentrationPenalty:
    """Local concentration filter"""

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigError):
            concentration_penalty(np.zeros((5, 5)), 4, 1.0)

    def test_uniform_image_unchanged(self):
        image = np.full((9, 9), 0.4)
        assert np.allclose(concentration_penalty(image, 3, 1.0).values, 0.4)

    def test_beta_exponent(self):
        image = np.full((9, 9), 0.5)
        assert np.allclose(concentration_penalty(image, 5, 2.0).values, 0.25)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(3)
        values = concentration_penalty(rng.random((20, 30)) > 0.7, 7, 1.5).values
        assert values.min() >= 0.0
        assert values.max() <= 1.0


class TestBuildCostmap:
    """Rasterised floe costs"""

    @pytest.fixture
    def params(self):
        return CostmapConfig(resolution=1.0, kernel_size=5)

    @pytest.fixture
    def costmap(self, small_field, params):
        return build_costmap(small_field, U_NOM, M_SHIP, params)

    def test_empty_field_costs_nothing(self, open_field, params):
        costmap = build_costmap(open_field, U_NOM, M_SHIP, params)
        assert costmap.max_cost == 0.0
        assert np.all(costmap.obstacle_id == -1)

    def test_uncovered_cells_are_free(self, costmap):
        assert np.all(costmap.cost[costmap.obstacle_id < 0] == 0.0)

    def test_costs_non_negative(self, costmap):
        assert costmap.cost.min() >= 0.0
        assert costmap.max_cost > 0.0

    def test_cost_peaks_near_centroid(self, costmap):
        grid = costmap.grid
        centre = costmap.cost[grid.row_of(40.0), grid.col_of(120.0)]
        edge = costmap.cost[grid.row_of(44.5), grid.col_of(120.0)]
        assert centre > edge

    def test_shape_covers_channel(self, costmap, small_field):
        assert costmap.grid.shape == (60, 200)

    def test_even_kernel_rejected(self, small_field):
        with pytest.raises(ConfigError):
            build_costmap(small_field, U_NOM, M_SHIP, CostmapConfig(resolution=1.0, kernel_size=4))

    def test_save_writes_header_and_grid(self, costmap, tmp_path):
        save_costmap(costmap, str(tmp_path / "costmap"))
        assert (tmp_path / "costmap.json").exists()
        assert np.array_equal(np.load(tmp_path / "costmap.npy"), costmap.cost)


class TestSwathCost:
    """Summation over swath cells"""

    @pytest.fixture
    def costmap(self):
        map_ = Costmap.empty(GridSpec(1.0, 4, 5))
        map_.cost[:] = np.arange(20, dtype=float).reshape(4, 5)
        return map_

    def test_distinct_cells_summed_once(self, costmap):
        assert swath_cost([(0, 1), (0, 1), (2, 3)], costmap) == pytest.approx(1.0 + 13.0)

    def test_off_grid_cells_ignored(self, costmap):
        assert swath_cost([(-1, 0), (1, 1), (9, 9)], costmap) == pytest.approx(6.0)

    def test_empty_swath(self, costmap):
        assert swath_cost(np.zeros((0, 2), dtype=np.int64), costmap) == 0.0

    def test_matches_brute_force(self, costmap):
        rng = np.random.default_rng(8)
        cells = rng.integers(0, 4, size=(30, 2))
        cells[:, 1] = rng.integers(0, 5, size=30)
        expected = sum(costmap.cost[r, c] for r, c in {tuple(cell) for cell in cells})
        assert swath_cost(cells, costmap) == pytest.approx(expected)


class TestCostField:
    """Smooth interpolated field with wall penalties"""

    @pytest.fixture
    def field_eval(self):
        field_ = make_field([square(60.0, 30.0, 6.0), square(100.0, 20.0, 5.0)])
        costmap = build_costmap(field_, U_NOM, M_SHIP, CostmapConfig(resolution=1.0, kernel_size=5))
        return cost_field(costmap, ship_width=6.0)

    def test_non_negative_everywhere(self, field_eval):
        xs, ys = np.meshgrid(np.linspace(-10.0, 210.0, 80), np.linspace(-20.0, 80.0, 50))
        value, _, _ = field_eval.evaluate(xs.ravel(), ys.ravel())
        assert value.min() >= 0.0

    def test_wall_penalty_grows_outside_channel(self, field_eval):
        inside, _ = field_eval.eval(20.0, 30.0)
        near, _ = field_eval.eval(20.0, -1.0)
        far, _ = field_eval.eval(20.0, -10.0)
        assert inside < near < far

    def test_wall_ramp_reaches_penalty_at_margin(self, field_eval):
        margin, penalty = field_eval.boundary_margin, field_eval.boundary_penalty
        wall, _ = field_eval.eval(20.0, 0.0)
        at_margin, _ = field_eval.eval(20.0, -margin)
        beyond, _ = field_eval.eval(20.0, 60.0 + 2.0 * margin)
        top, _ = field_eval.eval(20.0, 60.0)
        assert at_margin - wall == pytest.approx(penalty, rel=1e-9)
        assert beyond - top >= penalty

    def test_gradient_matches_finite_differences(self, field_eval):
        rng = np.random.default_rng(4)
        h = 1e-4
        scale = max(field_eval.map.max_cost, 1.0)
        for x, y in zip(rng.uniform(2.0, 198.0, 200), rng.uniform(-15.0, 75.0, 200)):
            _, grad = field_eval.eval(x, y)
            fx = (field_eval.eval(x + h, y)[0] - field_eval.eval(x - h, y)[0]) / (2 * h)
            fy = (field_eval.eval(x, y + h)[0] - field_eval.eval(x, y - h)[0]) / (2 * h)
            assert grad[0] == pytest.approx(fx, abs=1e-3 * scale)
            assert grad[1] == pytest.approx(fy, abs=1e-3 * scale)

    def test_invalid_margin(self, field_eval):
        with pytest.raises(ConfigError):
            cost_field(field_eval.map, boundary_margin=0.0)
