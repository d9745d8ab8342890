"""
Pydantic schemas for experiment configuration and interchange files
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Enums
class PlannerType(str, Enum):
    AUTO_ICENAV = "auto-icenav"
    LATTICE_ONLY = "lattice-only"
    AUTO_ICENAV_STRAIGHT_WS = "auto-icenav-straight-ws"
    STRAIGHT = "straight"
    SKELETON = "skeleton"


class SolverStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


# Base schemas
class BaseSchema(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


# Module configuration
class ChannelConfig(BaseSchema):
    length: float = Field(1000.0, gt=0)
    width: float = Field(200.0, gt=0)


class ShipConfig(BaseSchema):
    length: float = Field(76.2, gt=0)
    width: float = Field(18.0, gt=0)
    bow_length: float = Field(15.0, ge=0)
    mass: float = Field(6.0e6, gt=0)


class MassDistribution(BaseSchema):
    """Shifted log-normal: ln(mass / mass_unit_scale) = a + b·X, X ~ LogNormal(0, sigma)"""
    a: float = 10.21
    b: float = 0.9324
    sigma: float = 0.54
    mass_unit_scale: float = 1.0


class IceConfig(BaseSchema):
    distribution: MassDistribution = MassDistribution()
    thickness: float = Field(1.2, gt=0)
    density: float = Field(900.0, gt=0)
    min_width: float = Field(4.0, gt=0)
    max_width: float = Field(100.0, gt=0)


class CostmapConfig(BaseSchema):
    resolution: float = Field(2.0, gt=0)
    scale_factor: float = Field(0.1, ge=0)
    kernel_size: int = Field(51, ge=1)
    beta: float = Field(1.0, ge=0)
    boundary_penalty_factor: float = Field(10.0, gt=0)
    min_boundary_penalty: float = Field(1.0e6, ge=0)
    boundary_margin: Optional[float] = Field(None, gt=0)


class LatticeConfig(BaseSchema):
    spacing: float = Field(30.0, gt=0)
    heading_count: int = Field(8, ge=4)
    r_min: float = Field(150.0, gt=0)
    neighborhood: int = Field(5, ge=1)
    max_length_ratio: float = Field(1.5, ge=1.0)
    max_expansions: int = Field(200_000, ge=1)


class OptimizerConfig(BaseSchema):
    ds: float = Field(4.0, gt=0)
    body_point_spacing: float = Field(6.0, gt=0)
    smoothness_weight: float = Field(5.0e4, ge=0)
    max_iter: int = Field(100, ge=1)
    tol: float = Field(1e-8, gt=0)
    residual_tol: float = Field(1e-6, gt=0)
    ds_min_factor: float = Field(0.5, gt=0)
    ds_max_factor: float = Field(2.0, gt=0)


class ControllerConfig(BaseSchema):
    bandwidth: float = Field(0.05, gt=0)
    damping: float = Field(1.0, gt=0)
    accel: float = Field(0.04, gt=0)
    feed_forward: bool = True


class PhysicsConfig(BaseSchema):
    dt_sim: float = Field(0.005, gt=0)
    velocity_iterations: int = Field(4, ge=1)
    position_iterations: int = Field(2, ge=0)
    friction_ship_ice: float = Field(0.05, ge=0)
    friction_ice_ice: float = Field(0.35, ge=0)
    restitution: float = Field(0.1, ge=0, le=1)
    drag_coefficient: float = Field(1.0, ge=0)
    angular_decay: float = Field(0.03, ge=0, lt=1)
    water_density: float = Field(1025.0, gt=0)
    penetration_slop: float = Field(0.005, ge=0)
    baumgarte: float = Field(0.8, gt=0, le=1)
    track_interval: float = Field(0.1, gt=0)


class NavConfig(BaseSchema):
    horizon: float = Field(500.0, gt=0)
    replan_interval: float = Field(30.0, gt=0)
    nominal_speed: float = Field(2.0, gt=0)
    alpha: float = Field(4.8e-7, ge=0)
    switch_threshold: float = Field(0.05, ge=0)


class TrialConfig(BaseSchema):
    dt_ctrl: float = Field(0.02, gt=0)
    start_offset: float = Field(100.0, ge=0)
    timeout_factor: float = Field(3.0, gt=0)
    vessel_scale: float = Field(1.0, gt=0)
    vessel_file: Optional[str] = None


class ExperimentConfig(BaseSchema):
    """Every module configuration for one experiment"""
    profile: str = "full"
    channel: ChannelConfig = ChannelConfig()
    ship: ShipConfig = ShipConfig()
    ice: IceConfig = IceConfig()
    costmap: CostmapConfig = CostmapConfig()
    lattice: LatticeConfig = LatticeConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    controller: ControllerConfig = ControllerConfig()
    physics: PhysicsConfig = PhysicsConfig()
    nav: NavConfig = NavConfig()
    trial: TrialConfig = TrialConfig()

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        if self.nav.horizon <= self.ship.length:
            raise ValueError("nav.horizon must exceed the ship length")
        ratio = self.trial.dt_ctrl / self.physics.dt_sim
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValueError("physics.dt_sim must divide trial.dt_ctrl")
        if self.lattice.r_min < self.lattice.spacing / 2.0:
            raise ValueError("lattice.r_min must be at least half the lattice spacing")
        if self.ice.min_width >= self.ice.max_width:
            raise ValueError("ice.min_width must be below ice.max_width")
        return self


class ExperimentSpec(BaseSchema):
    concentrations: List[float] = Field(..., min_length=1)
    fields_per_concentration: int = Field(..., ge=1)
    planners: List[PlannerType] = Field(..., min_length=1)
    seed: int = 0
    profile: str = "desk"
    overrides: Dict = Field(default_factory=dict)
    parallelism: Optional[int] = Field(None, ge=1)
    output_dir: str = "results"
    save_logs: bool = False

    @model_validator(mode="after")
    def check_concentrations(self) -> "ExperimentSpec":
        for c in self.concentrations:
            if not 0.0 <= c <= 0.6:
                raise ValueError(f"concentration {c} outside [0, 0.6]")
        return self


# Interchange files
class IceFieldFile(BaseSchema):
    channel: Tuple[float, float]
    thickness: float = Field(..., gt=0)
    density: float = Field(..., gt=0)
    concentration: Optional[float] = None
    seed: Optional[int] = None
    floes: List[List[Tuple[float, float]]]
    circles: Optional[List[Tuple[float, float, float]]] = None


class VesselConfigFile(BaseSchema):
    A: List[List[float]]
    B: List[List[float]]
    T: List[List[float]]
    K: List[float]
    limits: List[float]
    mass: float = Field(..., gt=0)
    footprint: List[Tuple[float, float]]
    length: float = Field(..., gt=0)
    width: float = Field(..., gt=0)


class TrialMetrics(BaseSchema):
    mean_collided_mass: float = 0.0
    max_impact_force: float = 0.0
    mean_impact_force: float = 0.0
    ship_ke_loss: float = 0.0
    total_energy: float = 0.0
    total_time: float = 0.0
    path_length: float = 0.0
    mean_cross_track_error: float = 0.0
    mean_heading_error: float = 0.0
    w1: float = 0.0
    w2: float = 0.0
    w3: float = 0.0
    collision_count: int = 0
    collided_floes: int = 0
    pushed_floes: int = 0
    mean_pushed_mass: float = 0.0


class TrialRecordFile(BaseSchema):
    field_seed: Optional[int]
    planner: PlannerType
    concentration: float
    metrics: TrialMetrics
    planned_length: float
    planned_collision_cost: float
    planning_iterations: int
    mean_planning_ms: float
    trajectory_log: Optional[str] = None
    event_log: Optional[str] = None
