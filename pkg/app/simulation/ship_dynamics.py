"""
3-DoF vessel model for low-speed manoeuvring, dynamic-positioning
controller, thrust allocation and the nominal speed profile.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np
from pydantic import ValidationError

from ..core.errors import ConfigError
from ..core.geometry import ConvexPolygon, Pose, ShipFootprint, wrap_to_pi
from ..models.schemas import VesselConfigFile

logger = logging.getLogger(__name__)

# full-scale reference values
REFERENCE_MASS = 6.0e6
REFERENCE_LENGTH = 76.2
MAIN_FORCE_LIMIT = 799.0e3
TUNNEL_FORCE_LIMIT = 200.0e3
MAIN_RPM_AT_LIMIT = 160.0
TUNNEL_RPM_AT_LIMIT = 250.0
MAIN_LATERAL_ARM = 4.0
TUNNEL_ARMS = (30.0, 26.0, -26.0, -30.0)
TIME_CONSTANTS = (50.0, 50.0, 20.0)


@dataclass(frozen=True)
class ShipState:
    """Pose in the inertial frame, ν = (u, v, r) in the body frame"""

    eta: Pose
    nu: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=float).reshape(3)
        if not np.all(np.isfinite(nu)):
            raise ConfigError(f"Non-finite ship velocity {nu}")
        object.__setattr__(self, "nu", nu)

    @property
    def speed(self) -> float:
        return float(math.hypot(self.nu[0], self.nu[1]))

    def world_velocity(self) -> np.ndarray:
        """(ẋ, ẏ, ψ̇) in the inertial frame"""
        c, s = math.cos(self.eta.psi), math.sin(self.eta.psi)
        u, v, r = self.nu
        return np.array([c * u - s * v, s * u + c * v, r])


@dataclass(frozen=True, eq=False)
class VesselModel:
    """ν̇ = Aν + B(τ + τ_env), τ = T·K·u with u = |n|·n per actuator"""

    A: np.ndarray
    B: np.ndarray
    T: np.ndarray
    K: np.ndarray
    force_limits: np.ndarray
    mass: float
    footprint: ShipFootprint

    def __post_init__(self):
        for name, shape in (("A", (3, 3)), ("B", (3, 3))):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise ConfigError(f"{name} must be {shape}, got {value.shape}")
            object.__setattr__(self, name, value)
        T = np.asarray(self.T, dtype=float)
        K = np.asarray(self.K, dtype=float).reshape(-1)
        limits = np.asarray(self.force_limits, dtype=float).reshape(-1)
        if T.shape != (3, len(K)) or len(limits) != len(K):
            raise ConfigError("T must be 3×n with n thrust coefficients and n force limits")
        if abs(np.linalg.det(self.B)) < 1e-300:
            raise ConfigError("B must be nonsingular")
        if np.any(K <= 0) or np.any(limits <= 0):
            raise ConfigError("Thrust coefficients and force limits must be positive")
        if self.mass <= 0:
            raise ConfigError(f"Vessel mass must be positive, got {self.mass}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "force_limits", limits)

    @property
    def TK(self) -> np.ndarray:
        return self.T * self.K[None, :]

    @property
    def u_limits(self) -> np.ndarray:
        return self.force_limits / self.K

    @property
    def tau_limits(self) -> np.ndarray:
        """Per-axis box bound Σ_j |T_ij|·F_j of the attainable generalized force"""
        return np.abs(self.T) @ self.force_limits

    @property
    def M(self) -> np.ndarray:
        return np.linalg.inv(self.B)

    @property
    def D(self) -> np.ndarray:
        return -self.M @ self.A


def default_vessel(scale: float = 1.0) -> VesselModel:
    """Decoupled stable model: masses ∝ s³, yaw inertia ∝ s⁵, force limits ∝ s³, lever arms ∝ s"""
    if scale <= 0:
        raise ConfigError(f"Vessel scale must be positive, got {scale}")
    s = scale
    mass = REFERENCE_MASS * s ** 3
    length = REFERENCE_LENGTH * s
    inertia = mass * (0.25 * length) ** 2
    M = np.diag([mass, mass, inertia])
    A = np.diag([-1.0 / tc for tc in TIME_CONSTANTS])
    T = np.array([
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
        [-MAIN_LATERAL_ARM * s, MAIN_LATERAL_ARM * s] + [arm * s for arm in TUNNEL_ARMS],
    ])
    k_main = MAIN_FORCE_LIMIT / MAIN_RPM_AT_LIMIT ** 2
    k_tunnel = TUNNEL_FORCE_LIMIT / TUNNEL_RPM_AT_LIMIT ** 2
    K = np.array([k_main, k_main] + [k_tunnel] * 4)
    limits = np.array([MAIN_FORCE_LIMIT] * 2 + [TUNNEL_FORCE_LIMIT] * 4) * s ** 3
    footprint = ShipFootprint.default(76.2 * s, 18.0 * s, 15.0 * s)
    return VesselModel(A=A, B=np.linalg.inv(M), T=T, K=K, force_limits=limits, mass=mass, footprint=footprint)


def save_vessel(model: VesselModel, path: str):
    data = VesselConfigFile(
        A=model.A.tolist(), B=model.B.tolist(), T=model.T.tolist(), K=model.K.tolist(),
        limits=model.force_limits.tolist(), mass=model.mass,
        footprint=[tuple(map(float, v)) for v in model.footprint.outline.vertices],
        length=model.footprint.length, width=model.footprint.width,
    )
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(data.model_dump_json(indent=2))


def load_vessel(path: str) -> VesselModel:
    try:
        data = VesselConfigFile.model_validate(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        logger.error(f"Failed to load vessel config {path}: {e}")
        raise ConfigError(f"Invalid vessel config {path}: {e}") from e
    footprint = ShipFootprint(ConvexPolygon(np.asarray(data.footprint)), data.length, data.width)
    return VesselModel(A=np.array(data.A), B=np.array(data.B), T=np.array(data.T), K=np.array(data.K),
                       force_limits=np.array(data.limits), mass=data.mass, footprint=footprint)


# Dynamics

def _derivative(state: np.ndarray, model: VesselModel, force: np.ndarray) -> np.ndarray:
    psi = state[2]
    nu = state[3:]
    c, s = math.cos(psi), math.sin(psi)
    eta_dot = np.array([c * nu[0] - s * nu[1], s * nu[0] + c * nu[1], nu[2]])
    return np.concatenate([eta_dot, model.A @ nu + model.B @ force])


def step_vessel(state: ShipState, tau: np.ndarray, tau_env: np.ndarray, model: VesselModel,
                dt: float) -> ShipState:
    """RK4 over dt of the kinematics and the linear dynamics with constant forces"""
    force = np.asarray(tau, dtype=float) + np.asarray(tau_env, dtype=float)
    x = np.concatenate([[state.eta.x, state.eta.y, state.eta.psi], state.nu])
    k1 = _derivative(x, model, force)
    k2 = _derivative(x + 0.5 * dt * k1, model, force)
    k3 = _derivative(x + 0.5 * dt * k2, model, force)
    k4 = _derivative(x + dt * k3, model, force)
    x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return ShipState(eta=Pose(x[0], x[1], x[2]), nu=x[3:])


# Control

@dataclass(frozen=True, eq=False)
class DPGains:
    Kp: np.ndarray
    Kd: np.ndarray


def dp_gains(model: VesselModel, bandwidth: float = 0.05, damping: float = 1.0) -> DPGains:
    """Pole placement: Kp = ω²M, Kd = 2ζωM − D"""
    if bandwidth <= 0 or damping <= 0:
        raise ConfigError("Controller bandwidth and damping must be positive")
    M, D = model.M, model.D
    Kp = bandwidth ** 2 * M
    Kd = 2.0 * damping * bandwidth * M - D
    if np.any(np.linalg.eigvalsh(0.5 * (Kd + Kd.T)) <= 0):
        raise ConfigError("Derivative gain is not positive definite; raise the bandwidth")
    return DPGains(Kp=Kp, Kd=Kd)


def dp_control(state: ShipState, setpoint: Pose, setpoint_speed: float, gains: DPGains,
               model: VesselModel, feed_forward: bool = False) -> np.ndarray:
    """
    PD on the pose error rotated into the body frame and on the velocity error,
    saturated per axis. Zero errors give zero force unless feed_forward adds
    D·ν_d, which removes the steady along-track lag at cruise speed.
    """
    psi = state.eta.psi
    c, s = math.cos(psi), math.sin(psi)
    dx, dy = setpoint.x - state.eta.x, setpoint.y - state.eta.y
    error = np.array([c * dx + s * dy, -s * dx + c * dy, wrap_to_pi(setpoint.psi - psi)])
    dpsi = setpoint.psi - psi
    nu_d = np.array([setpoint_speed * math.cos(dpsi), setpoint_speed * math.sin(dpsi), 0.0])
    tau = gains.Kp @ error + gains.Kd @ (nu_d - state.nu)
    if feed_forward:
        tau = tau + model.D @ nu_d
    limits = model.tau_limits
    return np.clip(tau, -limits, limits)


@dataclass(frozen=True, eq=False)
class Allocation:
    u: np.ndarray
    rpm: np.ndarray
    tau: np.ndarray


def allocate_thrust(tau: np.ndarray, model: VesselModel) -> Allocation:
    """Least-norm actuator commands clipped to their limits, and the force they realize"""
    TK = model.TK
    u = np.linalg.pinv(TK) @ np.asarray(tau, dtype=float)
    u = np.clip(u, -model.u_limits, model.u_limits)
    rpm = np.sign(u) * np.sqrt(np.abs(u))
    return Allocation(u=u, rpm=rpm, tau=TK @ u)


# Speed profile

@dataclass(frozen=True)
class VelocityProfile:
    U_start: float
    U_nom: float
    accel: float = 0.04

    @property
    def ramp_time(self) -> float:
        return max(0.0, (self.U_nom - self.U_start) / self.accel)

    def speed_at(self, t: float) -> float:
        return min(self.U_nom, self.U_start + self.accel * max(t, 0.0))

    def distance_at(self, t: float) -> float:
        """Integral of speed_at over [0, t]"""
        t = max(t, 0.0)
        if self.U_start >= self.U_nom:
            return self.U_nom * t
        t_ramp = self.ramp_time
        if t <= t_ramp:
            return self.U_start * t + 0.5 * self.accel * t * t
        ramp = self.U_start * t_ramp + 0.5 * self.accel * t_ramp ** 2
        return ramp + self.U_nom * (t - t_ramp)


def make_velocity_profile(U_start: float, U_nom: float, accel: float = 0.04) -> VelocityProfile:
    if accel <= 0:
        raise ConfigError(f"Acceleration must be positive, got {accel}")
    if U_nom < 0:
        raise ConfigError(f"Nominal speed must be non-negative, got {U_nom}")
    return VelocityProfile(U_start=max(0.0, min(U_start, U_nom)), U_nom=U_nom, accel=accel)
