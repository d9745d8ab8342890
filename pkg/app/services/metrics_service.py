"""
Trial metrics: energy use, impact forces, kinetic energy loss, tracking
errors, the work done on pushed floes, and calibration of α
"""

import logging
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import CalibrationError
from ..models.schemas import TrialMetrics

logger = logging.getLogger(__name__)

# trajectory log layout, one row per control step
TRAJECTORY_COLUMNS = (
    "t", "x", "y", "psi", "u", "v", "r",
    "tau_x", "tau_y", "tau_n", "env_x", "env_y", "env_n",
    "cross_track_error", "heading_error",
)
COL = {name: i for i, name in enumerate(TRAJECTORY_COLUMNS)}

Track = Sequence[Tuple[float, float, float, float, float]]


def total_energy(trajectory: np.ndarray, dt_ctrl: float) -> float:
    """E = Δt·Σ_k |ν_k|ᵀ|τ_k| with the realized thrust"""
    if len(trajectory) == 0:
        return 0.0
    nu = np.abs(trajectory[:, COL["u"]:COL["r"] + 1])
    tau = np.abs(trajectory[:, COL["tau_x"]:COL["tau_n"] + 1])
    return float(dt_ctrl * np.sum(nu * tau))


def work_metrics(tracks: Mapping[int, Track], masses: Mapping[int, float],
                 pushed: Optional[Iterable[int]] = None) -> Tuple[float, float, float]:
    """
    Work done on the pushed floes from their sampled tracks:
    W1 the positive power integral, W2 the peak kinetic energy gain,
    W3 mass times distance travelled.
    """
    ids = sorted(tracks) if pushed is None else sorted(set(pushed) & set(tracks))
    w1 = w2 = w3 = 0.0
    for floe_id in ids:
        samples = np.asarray(tracks[floe_id], dtype=float)
        if len(samples) < 2:
            continue
        m = masses[floe_id]
        v = samples[:, 3:5]
        dv = np.diff(v, axis=0)
        power = np.sum(dv * v[1:], axis=1)
        w1 += m * float(np.sum(np.maximum(power, 0.0)))
        speed2 = np.sum(v * v, axis=1)
        w2 += 0.5 * m * float(speed2.max() - speed2[0])
        w3 += m * float(np.sum(np.linalg.norm(np.diff(samples[:, 1:3], axis=0), axis=1)))
    return w1, w2, w3


def compute_metrics(trajectory: np.ndarray, events: Sequence, dt_ctrl: float,
                    tracks: Optional[Mapping[int, Track]] = None,
                    masses: Optional[Mapping[int, float]] = None,
                    pushed: Optional[Iterable[int]] = None,
                    collided: Optional[Iterable[int]] = None) -> TrialMetrics:
    """Trial metrics from the trajectory log and the collision events"""
    trajectory = np.asarray(trajectory, dtype=float).reshape(-1, len(TRAJECTORY_COLUMNS))
    forces = np.array([e.impact_force for e in events]) if events else np.zeros(0)
    floe_mass: Dict[int, float] = {e.floe_id: e.floe_mass for e in events}
    ke_ship = float(sum(e.delta_k_ship for e in events))

    tracks = tracks or {}
    masses = masses or {}
    pushed = set(pushed) if pushed is not None else set()
    collided = set(collided) if collided is not None else set(floe_mass)
    w1, w2, w3 = work_metrics(tracks, masses, pushed) if tracks else (0.0, 0.0, 0.0)

    if len(trajectory):
        xy = trajectory[:, COL["x"]:COL["y"] + 1]
        path_length = float(np.sum(np.linalg.norm(np.diff(xy, axis=0), axis=1)))
        total_time = float(trajectory[-1, COL["t"]] + dt_ctrl)
        cte = float(np.mean(trajectory[:, COL["cross_track_error"]]))
        heading = float(np.mean(trajectory[:, COL["heading_error"]]))
    else:
        path_length = total_time = cte = heading = 0.0

    pushed_masses = [masses[i] for i in pushed if i in masses]
    return TrialMetrics(
        mean_collided_mass=float(np.mean(list(floe_mass.values()))) if floe_mass else 0.0,
        max_impact_force=float(forces.max()) if forces.size else 0.0,
        mean_impact_force=float(forces.mean()) if forces.size else 0.0,
        ship_ke_loss=-ke_ship,
        total_energy=total_energy(trajectory, dt_ctrl),
        total_time=total_time,
        path_length=path_length,
        mean_cross_track_error=cte,
        mean_heading_error=heading,
        w1=w1,
        w2=w2,
        w3=w3,
        collision_count=len(events),
        collided_floes=len(collided),
        pushed_floes=len(pushed),
        mean_pushed_mass=float(np.mean(pushed_masses)) if pushed_masses else 0.0,
    )


def alpha_for_trial(ke_loss: float, energy: float, length: float, collision_cost: float) -> float:
    """α that makes α·C/(L + α·C) equal the share ΔK/E of the energy lost to the ice"""
    if energy <= 0:
        raise CalibrationError(f"Total energy must be positive, got {energy}")
    if collision_cost <= 0:
        raise CalibrationError("Collision cost of the reference path is zero")
    ratio = ke_loss / energy
    if ratio >= 1.0:
        raise CalibrationError(f"Kinetic energy loss {ke_loss:.3g} J is not below total energy {energy:.3g} J")
    if ratio < 0.0:
        raise CalibrationError(f"Negative kinetic energy loss {ke_loss:.3g} J")
    return ratio * length / (collision_cost * (1.0 - ratio))


def calibrate_alpha(records: Sequence) -> float:
    """Mean per-trial α over Straight trial records (TrialRecordFile or anything with the same fields)"""
    if not records:
        raise CalibrationError("No trial records to calibrate from")
    alphas: List[float] = []
    for record in records:
        alphas.append(alpha_for_trial(record.metrics.ship_ke_loss, record.metrics.total_energy,
                                      record.planned_length, record.planned_collision_cost))
    alpha = float(np.mean(alphas))
    spread = float(np.std(alphas) / alpha) if alpha > 0 else 0.0
    logger.info(f"Calibrated alpha={alpha:.3g} from {len(alphas)} trials (CV {spread:.2f})")
    return alpha
