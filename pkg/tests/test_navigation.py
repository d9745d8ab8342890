#!/usr/bin/env python3
"""
Tests for the navigation service: planning iterations, baselines and the plan switch rule
"""

import numpy as np
import pytest

from app.core.errors import PlanningFailure
from app.core.geometry import PlannedPath, Pose
from app.models.schemas import PlannerType
from app.planners.costmap import Costmap, channel_grid
from app.planners.skeleton import plan_skeleton, pursue_route, shortcut_route
from app.services.navigation_service import (NavigationService, auto_icenav_iteration, keep_previous_plan,
                                             path_objective, remaining_path, run_skeleton, run_straight)
from app.simulation.ship_dynamics import ShipState

from conftest import make_field, square


def straight(y: float, x0: float = 0.0, x1: float = 100.0) -> PlannedPath:
    xs = np.linspace(x0, x1, 51)
    return PlannedPath(np.column_stack([xs, np.full_like(xs, y), np.zeros_like(xs)]))


class TestSwitchRule:
    """Remaining paths and keeping the previous plan"""

    def test_remaining_path_starts_at_projection(self):
        path = PlannedPath(np.array([[0.0, 0.0, 0.0], [50.0, 0.0, 0.0], [100.0, 0.0, 0.0]]))
        rest = remaining_path(path, Pose(30.0, 2.0, 0.0))
        assert rest.poses[0, :2] == pytest.approx([30.0, 0.0])
        assert rest.length == pytest.approx(70.0)

    def test_open_water_objective_is_length(self, open_costmap, small_footprint):
        assert path_objective(straight(30.0), open_costmap, 1.0, small_footprint) == pytest.approx(100.0)

    def test_objective_cut_at_x(self, open_costmap, small_footprint):
        assert path_objective(straight(30.0), open_costmap, 1.0, small_footprint, 40.0) == pytest.approx(40.0)

    def test_equal_plans_keep_previous(self, open_costmap, small_footprint):
        kept, rest = keep_previous_plan(straight(30.0), straight(30.0, 10.0), Pose(10.0, 30.0, 0.0),
                                        open_costmap, 1.0, small_footprint, 0.05, 20.0)
        assert kept
        assert rest.poses[0, 0] == pytest.approx(10.0)

    def test_short_remainder_is_replaced(self, open_costmap, small_footprint):
        kept, _ = keep_previous_plan(straight(30.0), straight(30.0, 90.0, 200.0), Pose(90.0, 30.0, 0.0),
                                     open_costmap, 1.0, small_footprint, 0.05, 20.0)
        assert not kept

    def test_costlier_previous_is_replaced(self, open_field, small_footprint):
        map_ = Costmap.empty(channel_grid(open_field, 1.0))
        map_.cost[25:35, 50:60] = 1.0e3
        kept, _ = keep_previous_plan(straight(30.0), straight(10.0), Pose(0.0, 30.0, 0.0),
                                     map_, 1.0, small_footprint, 0.05, 20.0)
        assert not kept


class TestSkeleton:
    """Skeleton baseline"""

    def test_open_water_follows_centreline(self, open_field):
        plan = plan_skeleton(Pose(20.0, 30.0, 0.0), 150.0, open_field, 75.0, 1.0, 2.0)
        assert plan.erosions == 0
        assert plan.path.end.x == pytest.approx(150.0, abs=1e-6)
        assert np.all(np.abs(plan.path.poses[:, 1] - 30.0) < 3.0)

    def test_blocked_channel_erodes_floes(self):
        barrier = make_field([square(100.0, y, 5.0) for y in (5.0, 15.0, 25.0, 35.0, 45.0, 55.0)])
        plan = plan_skeleton(Pose(20.0, 30.0, 0.0), 150.0, barrier, 75.0, 1.0, 2.0)
        assert plan.erosions > 0
        assert plan.path.end.x == pytest.approx(150.0, abs=1e-6)

    def test_subgoal_behind(self, open_field):
        with pytest.raises(PlanningFailure):
            plan_skeleton(Pose(50.0, 30.0, 0.0), 40.0, open_field, 75.0, 1.0)

    def test_shortcut_drops_collinear_vertices(self, open_field):
        grid = channel_grid(open_field, 1.0)
        free = np.ones(grid.shape, dtype=bool)
        route = np.array([[10.0, 30.0], [20.0, 30.0], [30.0, 30.0], [40.0, 30.0]])
        assert shortcut_route(route, free, grid).tolist() == [[10.0, 30.0], [40.0, 30.0]]

    def test_pursuit_curvature_bounded(self):
        route = np.array([[0.0, 30.0], [60.0, 45.0], [120.0, 30.0]])
        path = pursue_route(route, Pose(0.0, 30.0, 0.0), 120.0, 40.0, 1.0)
        psi = np.unwrap(path.poses[:, 2])
        steps = np.diff(path.arc_lengths())
        kappa = np.abs(np.diff(psi)) / np.maximum(steps, 1e-12)
        # chord lengths run slightly short of the arc
        assert np.all(kappa[steps > 0.5] <= 1.0 / 40.0 * (1.0 + 1e-4))


class TestPlanningIterations:
    """AUTO-IceNav iterations and the baselines"""

    @pytest.fixture
    def state(self):
        return ShipState(Pose(20.0, 30.0, 0.0))

    def test_auto_icenav_plan(self, state, small_field, small_config):
        plan = auto_icenav_iteration(state, small_field, small_config)
        assert plan.subgoal == pytest.approx(140.0)
        assert plan.path.poses[0, :2] == pytest.approx([20.0, 30.0], abs=1e-6)
        assert plan.path.end.x == pytest.approx(140.0, abs=1e-6)
        assert plan.stage2_objective <= plan.stage1_objective + 1e-9
        assert plan.solver_status is not None
        assert plan.costmap is not None

    def test_lattice_only_skips_refinement(self, state, small_field, small_config):
        plan = auto_icenav_iteration(state, small_field, small_config, variant=PlannerType.LATTICE_ONLY)
        assert plan.solver_status is None
        assert plan.path is plan.stage1_path
        assert plan.path.end.x == pytest.approx(140.0)

    def test_straight_warm_start_variant(self, state, small_field, small_config):
        plan = auto_icenav_iteration(state, small_field, small_config,
                                     variant=PlannerType.AUTO_ICENAV_STRAIGHT_WS)
        assert np.allclose(plan.stage1_path.poses[:, 1], 30.0)
        assert plan.nodes_expanded == 0

    def test_past_goal(self, small_field, small_config):
        with pytest.raises(PlanningFailure):
            auto_icenav_iteration(ShipState(Pose(250.0, 30.0, 0.0)), small_field, small_config)

    def test_replan_at_same_state_keeps_plan(self, state, small_field, small_config):
        service = NavigationService(small_config, PlannerType.AUTO_ICENAV)
        first = service.plan(state, small_field)
        second = service.plan(state, small_field)
        assert not first.kept_previous
        assert second.kept_previous
        assert second.subgoal == first.subgoal
        assert service.iterations == 2

    def test_straight_planned_once(self, state, small_field, small_config):
        service = NavigationService(small_config, PlannerType.STRAIGHT)
        first = service.plan(state, small_field)
        assert np.allclose(first.path.poses[:, 1], 30.0)
        assert first.path.end.x == pytest.approx(200.0)
        later = service.plan(ShipState(Pose(60.0, 31.0, 0.0), np.array([2.0, 0.0, 0.0])), small_field)
        assert later.kept_previous
        assert later.path.poses[0, 0] == pytest.approx(60.0)
        assert later.profile.U_start == pytest.approx(2.0)

    def test_run_straight(self, small_config):
        plan = run_straight(Pose(-50.0, 12.0, 0.3), 200.0, small_config)
        assert plan.path.poses[0] == pytest.approx([-50.0, 12.0, 0.0])
        assert plan.path.end.x == pytest.approx(200.0)
        assert plan.profile.U_start == 0.0

    def test_run_skeleton(self, state, small_field, small_config):
        plan = run_skeleton(state, small_field, small_config)
        assert plan.planner == PlannerType.SKELETON
        assert plan.path.end.x == pytest.approx(140.0, abs=1e-6)
