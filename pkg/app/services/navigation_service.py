"""
Navigation service: receding-horizon AUTO-IceNav planning iterations, the
Straight and Skeleton baselines, and the plan switch rule
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from shapely.geometry import LineString, Point

from ..core.errors import InfeasibleWarmStart, PlanningFailure
from ..core.geometry import PlannedPath, Pose, ShipFootprint, swath_trace
from ..models.schemas import ExperimentConfig, PlannerType, SolverStatus
from ..planners.control_set import ControlSet, LatticeSpec, control_set_for
from ..planners.costmap import Costmap, build_costmap, cost_field, swath_cost
from ..planners.lattice_planner import plan_path
from ..planners.path_optimizer import BodyPointSet, default_body_points, optimize_path, straight_warm_start
from ..planners.skeleton import plan_skeleton
from ..simulation.icefield import IceField
from ..simulation.ship_dynamics import ShipState, VelocityProfile, make_velocity_profile

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NavPlan:
    """
    Reference path and speed profile handed to the controller.

    For the optimizing planners stage1_objective is the warm start and
    stage2_objective the refined path, both under the optimizer objective.
    """

    planner: PlannerType
    path: PlannedPath
    profile: VelocityProfile
    subgoal: float
    stage1_objective: float = math.nan
    stage2_objective: float = math.nan
    planning_ms: float = 0.0
    stage1_path: Optional[PlannedPath] = None
    kept_previous: bool = False
    nodes_expanded: int = 0
    lattice_objective: float = math.nan
    solver_status: Optional[SolverStatus] = None
    costmap: Optional[Costmap] = field(default=None, repr=False)


def ship_footprint(config: ExperimentConfig) -> ShipFootprint:
    return ShipFootprint.default(config.ship.length, config.ship.width, config.ship.bow_length)


def remaining_path(path: PlannedPath, pose: Pose) -> PlannedPath:
    """Portion of the path ahead of the pose's projection onto it"""
    if len(path) < 2:
        return path
    s_all = path.arc_lengths()
    s = LineString(path.poses[:, :2]).project(Point(pose.x, pose.y))
    head = path.interpolate([s])
    ahead = path.poses[s_all > s + 1e-9]
    return PlannedPath(np.vstack([head, ahead]))


def path_objective(path: PlannedPath, map_: Costmap, alpha: float, footprint: ShipFootprint,
                   x_limit: Optional[float] = None) -> float:
    """L + α·swath cost on the given costmap, optionally cut at the line x = x_limit"""
    if x_limit is not None:
        path = path.truncate_at_x(x_limit)
    return path.length + alpha * swath_cost(swath_trace(path, footprint, map_.grid), map_)


def keep_previous_plan(previous: PlannedPath, candidate: PlannedPath, pose: Pose, map_: Costmap,
                       alpha: float, footprint: ShipFootprint, threshold: float,
                       min_remaining: float) -> Tuple[bool, PlannedPath]:
    """
    Switch rule: both plans are scored from the ship's projection up to their
    common x-extent. The old plan is kept when it is no more than threshold
    worse than the new one and still long enough to last until the next replan.
    """
    rest = remaining_path(previous, pose)
    if rest.length < min_remaining:
        return False, rest
    x_common = min(rest.poses[:, 0].max(), candidate.poses[:, 0].max())
    old = path_objective(rest, map_, alpha, footprint, x_common)
    new = path_objective(candidate, map_, alpha, footprint, x_common)
    return old <= new * (1.0 + threshold), rest


class NavigationService:
    """Runs one planning iteration per call for the configured strategy"""

    def __init__(self, config: ExperimentConfig, planner: PlannerType, x_goal: Optional[float] = None,
                 footprint: Optional[ShipFootprint] = None):
        self.config = config
        self.planner = PlannerType(planner)
        self.footprint = footprint or ship_footprint(config)
        self.x_goal = x_goal if x_goal is not None else config.channel.length
        self.previous: Optional[NavPlan] = None
        self.iterations = 0
        self._control_set: Optional[ControlSet] = None
        self._body: Optional[BodyPointSet] = None

    @property
    def control_set(self) -> ControlSet:
        if self._control_set is None:
            spec = LatticeSpec.from_config(self.config.lattice)
            self._control_set = control_set_for(spec, self.footprint, self.config.costmap.resolution)
        return self._control_set

    @property
    def body_points(self) -> BodyPointSet:
        if self._body is None:
            cfg = self.config
            self._body = default_body_points(self.footprint, cfg.optimizer.body_point_spacing, cfg.nav.alpha,
                                             cfg.costmap.resolution)
        return self._body

    def plan(self, state: ShipState, field_: IceField) -> NavPlan:
        """Plan from the current state on the current floe placements"""
        started = time.perf_counter()
        try:
            if self.planner == PlannerType.STRAIGHT:
                plan = self._straight(state)
            elif self.planner == PlannerType.SKELETON:
                plan = run_skeleton(state, field_, self.config, self.x_goal)
            else:
                plan = auto_icenav_iteration(state, field_, self.config, previous=self.previous,
                                             x_goal=self.x_goal, variant=self.planner,
                                             control_set=self.control_set, body=self.body_points,
                                             footprint=self.footprint)
        except PlanningFailure as e:
            logger.error(f"Failed to plan with {self.planner.value} at x={state.eta.x:.1f}: {e}")
            raise
        elapsed = (time.perf_counter() - started) * 1000.0
        plan = replace(plan, planning_ms=elapsed)
        self.previous = plan
        self.iterations += 1
        logger.info(f"Plan {self.iterations} ({self.planner.value}) at x={state.eta.x:.1f}: "
                    f"subgoal {plan.subgoal:.1f}, length {plan.path.length:.1f} m, "
                    f"{'kept previous, ' if plan.kept_previous else ''}{elapsed:.0f} ms")
        return plan

    def _straight(self, state: ShipState) -> NavPlan:
        """Straight line planned once; later iterations only replan the speed profile"""
        profile = make_velocity_profile(state.speed, self.config.nav.nominal_speed, self.config.controller.accel)
        if self.previous is None:
            return run_straight(state.eta, self.x_goal, self.config, U_start=state.speed)
        rest = remaining_path(self.previous.path, state.eta)
        return NavPlan(planner=PlannerType.STRAIGHT, path=rest, profile=profile, subgoal=self.x_goal,
                       kept_previous=True)


def auto_icenav_iteration(state: ShipState, field_: IceField, cfg: ExperimentConfig,
                          previous: Optional[NavPlan] = None, x_goal: Optional[float] = None,
                          variant: PlannerType = PlannerType.AUTO_ICENAV,
                          control_set: Optional[ControlSet] = None, body: Optional[BodyPointSet] = None,
                          footprint: Optional[ShipFootprint] = None) -> NavPlan:
    """
    One receding-horizon iteration: costmap from the current floes, lattice
    search to the subgoal, optimizer refinement, speed profile, switch rule.

    lattice-only skips the refinement; auto-icenav-straight-ws refines a
    straight warm start instead of the lattice path.
    """
    nav = cfg.nav
    variant = PlannerType(variant)
    footprint = footprint or ship_footprint(cfg)
    x_goal = cfg.channel.length if x_goal is None else x_goal
    pose = state.eta
    subgoal = min(pose.x + nav.horizon, x_goal)
    if subgoal <= pose.x:
        raise PlanningFailure(f"Ship at x={pose.x:.1f} is already past the goal x={x_goal:.1f}")

    map_ = build_costmap(field_, nav.nominal_speed, cfg.ship.mass, cfg.costmap)
    stage1_path: PlannedPath
    lattice_objective, expanded = math.nan, 0
    if variant == PlannerType.AUTO_ICENAV_STRAIGHT_WS:
        stage1_path = straight_warm_start(pose, subgoal, cfg.optimizer.ds)
    else:
        if control_set is None:
            control_set = control_set_for(LatticeSpec.from_config(cfg.lattice), footprint, cfg.costmap.resolution)
        result = plan_path(pose, subgoal, map_, control_set, nav.alpha, ship_width=footprint.width,
                           max_expansions=cfg.lattice.max_expansions)
        stage1_path = result.path.truncate_at_x(subgoal)
        lattice_objective, expanded = result.objective, result.nodes_expanded

    path, status = stage1_path, None
    stage1_obj, stage2_obj = lattice_objective, lattice_objective
    if variant != PlannerType.LATTICE_ONLY:
        if body is None:
            body = default_body_points(footprint, cfg.optimizer.body_point_spacing, nav.alpha,
                                       cfg.costmap.resolution)
        field_cost = cost_field(map_, params=cfg.costmap, ship_width=footprint.width)
        try:
            opt = optimize_path(stage1_path, field_cost, pose, subgoal, body, cfg.lattice.r_min,
                                cfg.optimizer, y_bounds=(0.0, cfg.channel.width))
            path, status = opt.to_path(), opt.status
            stage1_obj, stage2_obj = opt.warm_objective, opt.objective
        except InfeasibleWarmStart as e:
            logger.warning(f"Optimizer warm start infeasible, following the stage-1 path: {e}")

    profile = make_velocity_profile(state.speed, nav.nominal_speed, cfg.controller.accel)
    kept = False
    if previous is not None and previous.planner == variant:
        min_remaining = 2.0 * nav.nominal_speed * nav.replan_interval + cfg.ship.length
        kept, rest = keep_previous_plan(previous.path, path, pose, map_, nav.alpha, footprint,
                                        nav.switch_threshold, min_remaining)
        if kept:
            path = rest
            subgoal = previous.subgoal
    return NavPlan(planner=variant, path=path, profile=profile, subgoal=subgoal,
                   stage1_objective=stage1_obj, stage2_objective=stage2_obj, stage1_path=stage1_path,
                   kept_previous=kept, nodes_expanded=expanded, lattice_objective=lattice_objective,
                   solver_status=status, costmap=map_)


def run_straight(start: Pose, x_goal: float, cfg: ExperimentConfig, U_start: float = 0.0) -> NavPlan:
    """Straight path at the start's y, heading 0, from the start to the goal line"""
    path = straight_warm_start(Pose(start.x, start.y, 0.0), x_goal, cfg.optimizer.ds)
    profile = make_velocity_profile(U_start, cfg.nav.nominal_speed, cfg.controller.accel)
    return NavPlan(planner=PlannerType.STRAIGHT, path=path, profile=profile, subgoal=x_goal)


def run_skeleton(state: ShipState, field_: IceField, cfg: ExperimentConfig,
                 x_goal: Optional[float] = None) -> NavPlan:
    x_goal = cfg.channel.length if x_goal is None else x_goal
    subgoal = min(state.eta.x + cfg.nav.horizon, x_goal)
    result = plan_skeleton(state.eta, subgoal, field_, cfg.lattice.r_min, cfg.costmap.resolution,
                           cfg.optimizer.ds)
    profile = make_velocity_profile(state.speed, cfg.nav.nominal_speed, cfg.controller.accel)
    return NavPlan(planner=PlannerType.SKELETON, path=result.path, profile=profile, subgoal=subgoal)
