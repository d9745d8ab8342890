"""
Trial service: closed-loop run of one planner on one ice field.

Each control step the planner (replanned on a fixed interval) supplies the
setpoint, the DP controller and thrust allocation produce the realized
force, the vessel model integrates under that force plus the previous ice
reaction, and the physics world advances with the ship kinematics.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
import pandas as pd
from shapely.geometry import LineString, Point

from ..core.errors import TrialTimeout
from ..core.event_emitter import attach_event_log
from ..core.geometry import PlannedPath, Pose, ShipFootprint, swath_trace, wrap_to_pi
from ..models.schemas import ExperimentConfig, PlannerType, TrialMetrics, TrialRecordFile
from ..planners.costmap import build_costmap, swath_cost
from ..planners.path_optimizer import straight_warm_start
from ..simulation.icefield import IceField
from ..simulation.physics_sim import CollisionEvent, create_world, step_world
from ..simulation.ship_dynamics import (ShipState, VesselModel, allocate_thrust, default_vessel, dp_control,
                                        dp_gains, load_vessel, step_vessel)
from .metrics_service import TRAJECTORY_COLUMNS, compute_metrics
from .navigation_service import NavigationService, NavPlan, ship_footprint

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class TrialRecord:
    """Everything one trial produced; to_file() keeps the summary part"""

    field_seed: Optional[int]
    planner: PlannerType
    concentration: float
    metrics: TrialMetrics
    trajectory: np.ndarray
    events: List[CollisionEvent]
    tracks: Dict[int, List[Tuple[float, float, float, float, float]]] = field(default_factory=dict, repr=False)
    pushed: Set[int] = field(default_factory=set)
    collided: Set[int] = field(default_factory=set)
    floe_masses: Dict[int, float] = field(default_factory=dict, repr=False)
    planned_length: float = 0.0
    planned_collision_cost: float = 0.0
    planning_iterations: int = 0
    mean_planning_ms: float = 0.0
    first_plan: Optional[NavPlan] = field(default=None, repr=False)
    completed: bool = True
    trajectory_log: Optional[str] = None
    event_log: Optional[str] = None

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.trajectory, columns=list(TRAJECTORY_COLUMNS))

    def to_file(self) -> TrialRecordFile:
        return TrialRecordFile(
            field_seed=self.field_seed,
            planner=self.planner,
            concentration=self.concentration,
            metrics=self.metrics,
            planned_length=self.planned_length,
            planned_collision_cost=self.planned_collision_cost,
            planning_iterations=self.planning_iterations,
            mean_planning_ms=self.mean_planning_ms,
            trajectory_log=self.trajectory_log,
            event_log=self.event_log,
        )


def reference_path(start: Pose, channel_length: float, ds: float) -> PlannedPath:
    """Straight line from the start to the channel end used for calibration"""
    return straight_warm_start(Pose(start.x, start.y, 0.0), channel_length, ds)


def reference_collision_cost(field_: IceField, start: Pose, config: ExperimentConfig,
                             footprint: ShipFootprint) -> Tuple[float, float]:
    """(length, swath cost) of the straight reference path on the initial costmap"""
    path = reference_path(start, field_.channel_length, config.optimizer.ds)
    map_ = build_costmap(field_, config.nav.nominal_speed, config.ship.mass, config.costmap)
    return path.length, swath_cost(swath_trace(path, footprint, map_.grid), map_)


def trial_vessel(config: ExperimentConfig) -> VesselModel:
    if config.trial.vessel_file:
        return load_vessel(config.trial.vessel_file)
    return default_vessel(config.trial.vessel_scale)


def write_trajectory(trajectory: np.ndarray, path: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(trajectory, columns=list(TRAJECTORY_COLUMNS)).to_csv(path, index=False, float_format="%.6g")


def read_trajectory(path: str) -> np.ndarray:
    frame = pd.read_csv(path)
    return frame[list(TRAJECTORY_COLUMNS)].to_numpy(dtype=float)


def run_trial(field_: IceField, planner: PlannerType, config: ExperimentConfig,
              vessel: Optional[VesselModel] = None, event_log_path: Optional[str] = None,
              trajectory_path: Optional[str] = None) -> TrialRecord:
    """
    Sail from x = -start_offset on the channel centreline to x = L.

    Raises TrialTimeout, carrying the partial record, if the ship has not
    reached the goal after timeout_factor times the nominal transit time.
    """
    planner = PlannerType(planner)
    vessel = vessel or trial_vessel(config)
    footprint = vessel.footprint if config.trial.vessel_file else ship_footprint(config)
    gains = dp_gains(vessel, config.controller.bandwidth, config.controller.damping)
    nav_cfg, trial_cfg = config.nav, config.trial
    dt = trial_cfg.dt_ctrl
    goal_x = field_.channel_length

    start = Pose(-trial_cfg.start_offset, 0.5 * field_.channel_width, 0.0)
    state = ShipState(eta=start)
    world = create_world(field_, start, footprint, vessel.mass, config.physics)
    nav = NavigationService(config, planner, x_goal=goal_x + footprint.length, footprint=footprint)
    planned_length, planned_cost = reference_collision_cost(field_, start, config, footprint)

    t_max = trial_cfg.timeout_factor * (goal_x + trial_cfg.start_offset) / nav_cfg.nominal_speed
    n_max = int(math.ceil(t_max / dt))
    rows = np.zeros((n_max, len(TRAJECTORY_COLUMNS)))
    events: List[CollisionEvent] = []
    planning_ms: List[float] = []
    tau_env = np.zeros(3)
    plan: Optional[NavPlan] = None
    first_plan: Optional[NavPlan] = None
    line: Optional[LineString] = None
    plan_t0 = next_replan = 0.0

    log = attach_event_log(world.emitter, event_log_path)
    logger.info(f"Starting trial: {planner.value} on field seed {field_.seed} "
                f"(concentration {field_.concentration:.2f}, {len(field_.floes)} floes)")

    def record(n_rows: int, completed: bool) -> TrialRecord:
        trajectory = rows[:n_rows]
        metrics = compute_metrics(trajectory, events, dt, world.tracks, world.floe_masses,
                                  world.pushed, world.collided)
        if trajectory_path:
            write_trajectory(trajectory, trajectory_path)
        return TrialRecord(
            field_seed=field_.seed, planner=planner, concentration=round(field_.concentration, 4),
            metrics=metrics, trajectory=trajectory, events=list(events), tracks=world.tracks,
            pushed=set(world.pushed), collided=set(world.collided), floe_masses=world.floe_masses,
            planned_length=planned_length, planned_collision_cost=planned_cost,
            planning_iterations=nav.iterations,
            mean_planning_ms=float(np.mean(planning_ms)) if planning_ms else 0.0,
            first_plan=first_plan, completed=completed,
            trajectory_log=trajectory_path, event_log=event_log_path,
        )

    try:
        k = 0
        while state.eta.x < goal_x:
            if k >= n_max:
                logger.warning(f"Trial timed out at t={k * dt:.0f} s, x={state.eta.x:.1f}")
                raise TrialTimeout(f"{planner.value} did not reach x={goal_x:g} within {t_max:.0f} s",
                                   record=record(k, completed=False))
            t = k * dt
            if plan is None or t >= next_replan:
                plan = nav.plan(state, world.to_field(field_.seed))
                first_plan = first_plan or plan
                planning_ms.append(plan.planning_ms)
                line = LineString(plan.path.poses[:, :2]) if len(plan.path) > 1 else None
                plan_t0, next_replan = t, t + nav_cfg.replan_interval

            s = plan.profile.distance_at(t - plan_t0)
            setpoint = Pose.from_array(plan.path.interpolate([s])[0])
            tau = dp_control(state, setpoint, plan.profile.speed_at(t - plan_t0), gains, vessel,
                             feed_forward=config.controller.feed_forward)
            realized = allocate_thrust(tau, vessel).tau
            nxt = step_vessel(state, realized, tau_env, vessel, dt)
            step_env, step_events = step_world(world, nxt.eta, nxt.nu, dt)
            events.extend(step_events)

            cte = line.distance(Point(state.eta.x, state.eta.y)) if line is not None else 0.0
            heading = abs(wrap_to_pi(setpoint.psi - state.eta.psi))
            rows[k] = (t, state.eta.x, state.eta.y, state.eta.psi, *state.nu, *realized, *tau_env, cte, heading)
            state, tau_env = nxt, step_env
            k += 1
        result = record(k, completed=True)
    finally:
        if log is not None:
            world.emitter.remove_listener(log)
            log.close()

    m = result.metrics
    logger.info(f"Finished trial {planner.value} on seed {field_.seed}: {m.total_time:.0f} s, "
                f"{m.collision_count} collisions, max impact {m.max_impact_force:.3g} N")
    return result
