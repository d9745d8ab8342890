"""
Stage-2 planner: direct multiple shooting over the arc-length unicycle.

Decision variables are the poses η_1..η_{N+1}, the curvatures κ_1..κ_N and a
shared step Δs. The objective integrates the cost field over a grid of body
points, adds the path length and penalises curvature changes. Solved with
scipy's SLSQP using analytic gradients and constraint Jacobians.
"""

import json
import logging
import math
from dataclasses import dataclass
from itertools import count
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq, minimize

from ..core.config import settings
from ..core.errors import ConfigError, InfeasibleWarmStart
from ..core.geometry import PlannedPath, Pose, ShipFootprint
from ..models.schemas import OptimizerConfig, SolverStatus
from .costmap import CostField

logger = logging.getLogger(__name__)

_trace_counter = count()


@dataclass(frozen=True, eq=False)
class BodyPointSet:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.weights) < 0):
            raise ConfigError("Body point weights must be non-negative")

    def __len__(self) -> int:
        return len(self.points)


def default_body_points(footprint: ShipFootprint, spacing: float, alpha: float,
                        grid_res: float) -> BodyPointSet:
    """Square grid over the footprint's enclosing rectangle, weights α·Δb²/(ℓ·Δ_grid²)"""
    if spacing <= 0:
        raise ConfigError(f"Body point spacing must be positive, got {spacing}")
    verts = footprint.outline.vertices
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    axes = []
    for k in range(2):
        extent = hi[k] - lo[k]
        n = int(math.floor(extent / spacing + 1e-9)) + 1
        centre = 0.5 * (lo[k] + hi[k])
        axes.append(centre + (np.arange(n) - (n - 1) / 2.0) * spacing)
    xs, ys = np.meshgrid(axes[0], axes[1])
    points = np.column_stack([xs.ravel(), ys.ravel()])
    weight = alpha * spacing ** 2 / (footprint.length * grid_res ** 2)
    return BodyPointSet(points=points, weights=np.full(len(points), weight))


def rk4_unicycle_step(pose, kappa: float, ds: float) -> np.ndarray:
    """One RK4 step of (cos ψ, sin ψ, κ) over arc length Δs; exact in ψ"""
    x, y, psi = float(pose[0]), float(pose[1]), float(pose[2])
    a1 = psi + 0.5 * ds * kappa
    a2 = psi + ds * kappa
    return np.array([
        x + ds / 6.0 * (math.cos(psi) + 4.0 * math.cos(a1) + math.cos(a2)),
        y + ds / 6.0 * (math.sin(psi) + 4.0 * math.sin(a1) + math.sin(a2)),
        a2,
    ])


def _rk4_batch(poses: np.ndarray, kappa: np.ndarray, ds: float):
    """Vectorised step and its partial derivatives w.r.t. ψ, κ and Δs"""
    psi = poses[:, 2]
    a1 = psi + 0.5 * ds * kappa
    a2 = psi + ds * kappa
    c0, c1, c2 = np.cos(psi), np.cos(a1), np.cos(a2)
    s0, s1, s2 = np.sin(psi), np.sin(a1), np.sin(a2)
    h6 = ds / 6.0
    f = np.column_stack([
        poses[:, 0] + h6 * (c0 + 4 * c1 + c2),
        poses[:, 1] + h6 * (s0 + 4 * s1 + s2),
        a2,
    ])
    d_psi = np.column_stack([-h6 * (s0 + 4 * s1 + s2), h6 * (c0 + 4 * c1 + c2), np.ones_like(psi)])
    d_kappa = np.column_stack([
        -h6 * (2 * ds * s1 + ds * s2),
        h6 * (2 * ds * c1 + ds * c2),
        np.full_like(psi, ds),
    ])
    d_ds = np.column_stack([
        (c0 + 4 * c1 + c2) / 6.0 - h6 * (2 * kappa * s1 + kappa * s2),
        (s0 + 4 * s1 + s2) / 6.0 + h6 * (2 * kappa * c1 + kappa * c2),
        kappa,
    ])
    return f, d_psi, d_kappa, d_ds


def rollout(start: np.ndarray, kappa: np.ndarray, ds: float) -> np.ndarray:
    poses = np.empty((len(kappa) + 1, 3))
    poses[0] = start
    for i, k in enumerate(kappa):
        poses[i + 1] = rk4_unicycle_step(poses[i], k, ds)
    return poses


@dataclass(frozen=True, eq=False)
class NlpProblem:
    """Decision vector layout: [x_1, y_1, ψ_1, ..., x_{N+1}, y_{N+1}, ψ_{N+1}, κ_1..κ_N, Δs]"""

    field: CostField
    body: BodyPointSet
    eta_cur: np.ndarray
    x_subgoal: float
    n_intervals: int
    r_min: float
    smoothness: float
    ds_bounds: Tuple[float, float]

    def __post_init__(self):
        if self.n_intervals < 2:
            raise ConfigError(f"Need at least 2 control intervals, got {self.n_intervals}")

    @property
    def size(self) -> int:
        return 4 * self.n_intervals + 4

    def split(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        N = self.n_intervals
        k0 = 3 * (N + 1)
        return z[:k0].reshape(N + 1, 3), z[k0:k0 + N], float(z[-1])

    def pack(self, poses: np.ndarray, kappa: np.ndarray, ds: float) -> np.ndarray:
        return np.concatenate([np.asarray(poses, dtype=float).ravel(), kappa, [ds]])


def nlp_objective(problem: NlpProblem, z: np.ndarray) -> Tuple[float, np.ndarray]:
    """Body-point collision integral + N·Δs + λ·Σ((κ_{i+1} − κ_i)/Δs)², with its gradient"""
    poses, kappa, ds = problem.split(np.asarray(z, dtype=float))
    N = problem.n_intervals
    bx, by = problem.body.points[:, 0][None, :], problem.body.points[:, 1][None, :]
    w = problem.body.weights[None, :]
    k = np.append(kappa, kappa[-1])[:, None]
    c, s = np.cos(poses[:, 2])[:, None], np.sin(poses[:, 2])[:, None]

    gx = poses[:, 0][:, None] + c * bx - s * by
    gy = poses[:, 1][:, None] + s * bx + c * by
    value, cx, cy = problem.field.evaluate(gx, gy)
    norm = np.maximum(np.sqrt((1.0 - k * by) ** 2 + (k * bx) ** 2), 1e-12)
    term = w * value * norm
    collision = ds * float(term.sum())

    dk = np.diff(kappa)
    smooth = problem.smoothness * float(np.sum(dk ** 2)) / ds ** 2
    objective = collision + N * ds + smooth

    grad = np.zeros(problem.size)
    g_pose = grad[:3 * (N + 1)].reshape(N + 1, 3)
    g_pose[:, 0] = ds * np.sum(w * cx * norm, axis=1)
    g_pose[:, 1] = ds * np.sum(w * cy * norm, axis=1)
    dgx_dpsi = -s * bx - c * by
    dgy_dpsi = c * bx - s * by
    g_pose[:, 2] = ds * np.sum(w * (cx * dgx_dpsi + cy * dgy_dpsi) * norm, axis=1)

    dnorm_dk = (-by * (1.0 - k * by) + k * bx ** 2) / norm
    g_k = ds * np.sum(w * value * dnorm_dk, axis=1)
    g_kappa = g_k[:N].copy()
    g_kappa[-1] += g_k[N]
    g_kappa += 2.0 * problem.smoothness / ds ** 2 * (np.concatenate([[0.0], dk]) - np.concatenate([dk, [0.0]]))
    grad[3 * (N + 1):3 * (N + 1) + N] = g_kappa
    grad[-1] = float(term.sum()) + N - 2.0 * smooth / ds
    return objective, grad


def _constraints(problem: NlpProblem, z: np.ndarray) -> np.ndarray:
    poses, kappa, ds = problem.split(z)
    f = _rk4_batch(poses[:-1], kappa, ds)[0]
    return np.concatenate([
        (poses[1:] - f).ravel(),
        poses[0] - problem.eta_cur,
        [poses[-1, 0] - problem.x_subgoal],
    ])


def _constraints_jac(problem: NlpProblem, z: np.ndarray) -> np.ndarray:
    poses, kappa, ds = problem.split(z)
    N = problem.n_intervals
    _, d_psi, d_kappa, d_ds = _rk4_batch(poses[:-1], kappa, ds)
    jac = np.zeros((3 * N + 4, problem.size))
    i = np.arange(N)
    for comp in range(3):
        rows = 3 * i + comp
        jac[rows, 3 * (i + 1) + comp] = 1.0
        jac[rows, 3 * i + comp] = -1.0
        if comp < 2:
            jac[rows, 3 * i + 2] -= d_psi[:, comp]
        jac[rows, 3 * (N + 1) + i] = -d_kappa[:, comp]
        jac[rows, -1] = -d_ds[:, comp]
    for comp in range(3):
        jac[3 * N + comp, comp] = 1.0
    jac[3 * N + 3, 3 * N] = 1.0
    return jac


def max_dynamics_residual(problem: NlpProblem, z: np.ndarray) -> float:
    return float(np.max(np.abs(_constraints(problem, z)[:3 * problem.n_intervals])))


@dataclass(frozen=True, eq=False)
class OptimizedPath:
    poses: np.ndarray
    kappa: np.ndarray
    ds: float
    objective: float
    status: SolverStatus
    warm_objective: float = math.nan
    iterations: int = 0

    def to_path(self) -> PlannedPath:
        return PlannedPath(self.poses)


def straight_warm_start(start: Pose, x_subgoal: float, ds: float) -> PlannedPath:
    """Straight line along +x from the start position to the subgoal line"""
    n = max(2, int(math.ceil((x_subgoal - start.x) / ds)))
    xs = np.linspace(start.x, x_subgoal, n + 1)
    return PlannedPath(np.column_stack([xs, np.full_like(xs, start.y), np.zeros_like(xs)]))


def _fit_ds(start: np.ndarray, kappa: np.ndarray, x_target: float, lo: float, hi: float) -> Optional[float]:
    """Δs so that the rollout ends on the line x = x_target, None if not bracketed"""
    def gap(ds):
        return rollout(start, kappa, ds)[-1, 0] - x_target
    g_lo, g_hi = gap(lo), gap(hi)
    if g_lo == 0.0:
        return lo
    if g_lo * g_hi > 0:
        return None
    return brentq(gap, lo, hi, xtol=1e-13, rtol=1e-15, maxiter=200)


def _warm_variables(warm_start: PlannedPath, eta_cur: np.ndarray, x_subgoal: float,
                    ds: float, r_min: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Warm path resampled to N+1 poses, its clipped curvatures and the uniform step"""
    path = warm_start.truncate_at_x(x_subgoal)
    gap = float(np.hypot(*(path.poses[0, :2] - eta_cur[:2])))
    if gap > ds:
        raise InfeasibleWarmStart(
            f"Warm start begins {gap:.1f} m away from the ship at ({eta_cur[0]:.1f}, {eta_cur[1]:.1f})"
        )
    if path.length <= 0.0 or path.end.x < x_subgoal - 1e-6:
        raise InfeasibleWarmStart(f"Warm start does not reach x={x_subgoal:.1f}")
    n = max(2, int(round(path.length / ds)))
    samples = path.interpolate(np.linspace(0.0, path.length, n + 1))
    samples[:, 2] = np.unwrap(samples[:, 2])
    step = path.length / n
    kappa = np.clip(np.diff(samples[:, 2]) / step, -1.0 / r_min, 1.0 / r_min)
    return samples, kappa, step


class _Tracer:
    def __init__(self, problem: NlpProblem, scale: np.ndarray):
        self.problem = problem
        self.scale = scale
        self.iteration = 0
        self.previous: Optional[np.ndarray] = None
        self.path = Path(settings.results_dir) / "trace" / f"optimizer_{next(_trace_counter):04d}.ndjson"
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def __call__(self, u: np.ndarray):
        z = u * self.scale
        self.iteration += 1
        step = float(np.linalg.norm(z - self.previous)) if self.previous is not None else 0.0
        self.previous = z.copy()
        with self.path.open("a") as fh:
            fh.write(json.dumps({
                "iter": self.iteration,
                "objective": nlp_objective(self.problem, z)[0],
                "max_residual": max_dynamics_residual(self.problem, z),
                "step_norm": step,
            }) + "\n")


def _inside(poses: np.ndarray, y_bounds: Optional[Tuple[float, float]]) -> bool:
    if y_bounds is None:
        return True
    return bool(np.all((poses[:, 1] >= y_bounds[0]) & (poses[:, 1] <= y_bounds[1])))


def optimize_path(warm_start: PlannedPath, field: CostField, eta_cur: Pose, x_subgoal: float,
                  body: BodyPointSet, r_min: float, params: Optional[OptimizerConfig] = None,
                  y_bounds: Optional[Tuple[float, float]] = None) -> OptimizedPath:
    """
    Refine a warm-start path to a locally optimal, dynamically feasible one.

    The shooting poses start on the warm path resampled to N+1 points and the
    equality constraints close the defects, including the one left by a ship
    heading that differs from the path's. The warm objective is scored on the
    warm path itself. The refined path is returned only when it is inside the
    channel and no worse than the warm path; otherwise the warm path is
    returned. Raises InfeasibleWarmStart when neither is inside the channel.
    """
    params = params or OptimizerConfig()
    warm_poses, kappa0, ds0 = _warm_variables(warm_start, eta_cur.as_array(), x_subgoal, params.ds, r_min)
    start = eta_cur.as_array()
    start[2] = float(np.unwrap([warm_poses[0, 2], start[2]])[1])
    N = len(kappa0)
    ds_bounds = (params.ds_min_factor * ds0, params.ds_max_factor * ds0)
    problem = NlpProblem(field=field, body=body, eta_cur=start, x_subgoal=x_subgoal, n_intervals=N,
                         r_min=r_min, smoothness=params.smoothness_weight, ds_bounds=ds_bounds)
    warm_objective = nlp_objective(problem, problem.pack(warm_poses, kappa0, ds0))[0]
    poses0 = warm_poses.copy()
    poses0[0] = start
    z0 = problem.pack(poses0, kappa0, ds0)

    scale = np.ones(problem.size)
    scale[3 * (N + 1):3 * (N + 1) + N] = 1.0 / r_min
    scale[-1] = ds0
    bounds = [(None, None)] * (3 * (N + 1)) + [(-1.0, 1.0)] * N + [
        (ds_bounds[0] / ds0, ds_bounds[1] / ds0)]

    def fun(u):
        value, grad = nlp_objective(problem, u * scale)
        return value, grad * scale

    constraint = {
        "type": "eq",
        "fun": lambda u: _constraints(problem, u * scale),
        "jac": lambda u: _constraints_jac(problem, u * scale) * scale[None, :],
    }
    callback = _Tracer(problem, scale) if settings.optimizer_trace else None
    res = minimize(fun, z0 / scale, jac=True, method="SLSQP", bounds=bounds, constraints=[constraint],
                   callback=callback, options={"maxiter": params.max_iter, "ftol": params.tol})
    status = SolverStatus.CONVERGED if res.success else (
        SolverStatus.MAX_ITER if res.status == 9 else SolverStatus.INFEASIBLE)
    logger.debug(f"SLSQP finished after {res.nit} iterations: {res.message}")

    candidates = []
    if _inside(warm_poses, y_bounds):
        candidates.append((warm_objective, warm_poses, kappa0, ds0))
    _, kappa_opt, _ = problem.split(res.x * scale)
    kappa_opt = np.clip(kappa_opt, -1.0 / r_min, 1.0 / r_min)
    ds_fit = _fit_ds(start, kappa_opt, x_subgoal, *ds_bounds)
    if ds_fit is None:
        logger.warning(f"Optimized curvatures cannot reach x={x_subgoal:.1f}; keeping the warm start")
        status = SolverStatus.INFEASIBLE
    else:
        poses_opt = rollout(start, kappa_opt, ds_fit)
        if _inside(poses_opt, y_bounds):
            objective = nlp_objective(problem, problem.pack(poses_opt, kappa_opt, ds_fit))[0]
            candidates.append((objective, poses_opt, kappa_opt, ds_fit))
        else:
            logger.warning("Optimized path leaves the channel")
            status = SolverStatus.INFEASIBLE
    if not candidates:
        raise InfeasibleWarmStart(f"Neither the warm start nor the optimized path to x={x_subgoal:.1f} "
                                  f"stays inside y in {y_bounds}")

    objective, poses, kappa, ds = min(candidates, key=lambda c: c[0])
    poses = poses.copy()
    poses[:, 2] = np.mod(poses[:, 2], 2.0 * math.pi)
    logger.debug(f"Optimized path: objective {objective:.3f} (warm start {warm_objective:.3f}), "
                 f"N={N}, ds={ds:.3f}, status {status.value}")
    return OptimizedPath(poses=poses, kappa=kappa, ds=ds, objective=objective, status=status,
                         warm_objective=warm_objective, iterations=int(res.nit))
