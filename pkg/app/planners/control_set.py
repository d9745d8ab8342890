"""
State-lattice control sets: curvature-bounded motion primitives between
lattice nodes, with swaths precomputed on a grid anchored at the primitive
origin.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np

from ..core.errors import ConfigError
from ..core.geometry import GridSpec, PlannedPath, Point2, ShipFootprint, rasterize_geometry, swath_geometry
from ..models.schemas import LatticeConfig
from .dubins import dubins_shortest

logger = logging.getLogger(__name__)

_PRUNE_TOL = 1e-9


@dataclass(frozen=True)
class LatticeSpec:
    spacing: float = 30.0
    heading_count: int = 8
    r_min: float = 150.0
    neighborhood: int = 5
    max_length_ratio: float = 1.5

    def __post_init__(self):
        if self.spacing <= 0:
            raise ConfigError(f"Lattice spacing must be positive, got {self.spacing}")
        if self.heading_count < 4 or self.heading_count % 4 != 0:
            raise ConfigError(f"Heading count must be a positive multiple of 4, got {self.heading_count}")
        if self.r_min < self.spacing / 2.0:
            raise ConfigError(f"r_min {self.r_min} is below half the lattice spacing {self.spacing}")

    @classmethod
    def from_config(cls, cfg: LatticeConfig) -> "LatticeSpec":
        return cls(cfg.spacing, cfg.heading_count, cfg.r_min, cfg.neighborhood, cfg.max_length_ratio)

    @property
    def heading_step(self) -> float:
        return 2.0 * math.pi / self.heading_count

    def heading(self, index: int) -> float:
        return (index % self.heading_count) * self.heading_step

    def nearest_heading(self, psi: float) -> int:
        return int(round(psi / self.heading_step)) % self.heading_count


@dataclass(frozen=True, eq=False)
class MotionPrimitive:
    """Edge from (0, 0, start heading) to (di·spacing, dj·spacing, start + dh)"""

    id: int
    start_heading: int
    offset: Tuple[int, int, int]
    poses: np.ndarray
    curvatures: np.ndarray
    length: float
    swath: np.ndarray = field(repr=False)

    @property
    def end_heading_offset(self) -> int:
        return self.offset[2]


@dataclass(frozen=True, eq=False)
class ControlSet:
    spec: LatticeSpec
    grid_res: float
    primitives: Tuple[MotionPrimitive, ...]
    by_heading: Dict[int, Tuple[MotionPrimitive, ...]]

    @property
    def r_min(self) -> float:
        return self.spec.r_min

    @property
    def cells_per_spacing(self) -> int:
        return int(round(self.spec.spacing / self.grid_res))

    def __len__(self) -> int:
        return len(self.primitives)


def _relative_swath(poses: np.ndarray, footprint: ShipFootprint, grid_res: float) -> np.ndarray:
    """Swath cells (row, col) on the grid whose cell (0, 0) has its lower-left corner at the origin"""
    geom = swath_geometry(PlannedPath(poses), footprint, grid_res / 2.0)
    x_min, y_min, x_max, y_max = geom.bounds
    c0 = math.floor(x_min / grid_res)
    r0 = math.floor(y_min / grid_res)
    grid = GridSpec.covering(c0 * grid_res, r0 * grid_res, x_max, y_max, grid_res)
    grid = GridSpec(grid_res, grid.n_rows + 1, grid.n_cols + 1, Point2(c0 * grid_res, r0 * grid_res))
    cells = rasterize_geometry(geom, grid)
    return cells + np.array([r0, c0], dtype=np.int64)


def _rotate_quarter(poses: np.ndarray, swath: np.ndarray, turns: int) -> Tuple[np.ndarray, np.ndarray]:
    """Rotate poses and grid-anchored swath cells by turns·90° about the origin"""
    poses, swath = poses.copy(), swath.copy()
    for _ in range(turns % 4):
        poses = np.column_stack([-poses[:, 1], poses[:, 0], poses[:, 2] + math.pi / 2.0])
        swath = np.column_stack([swath[:, 1], -swath[:, 0] - 1])
    poses[:, 2] = np.mod(poses[:, 2], 2.0 * math.pi)
    return poses, swath


def _rotate_offset(offset: Tuple[int, int, int], turns: int) -> Tuple[int, int]:
    di, dj = offset[0], offset[1]
    for _ in range(turns % 4):
        di, dj = -dj, di
    return di, dj


def _candidates(spec: LatticeSpec, start_heading: int) -> List[Tuple[float, Tuple[int, int, int], object]]:
    out = []
    n = spec.neighborhood
    th0 = spec.heading(start_heading)
    for di in range(-n, n + 1):
        for dj in range(-n, n + 1):
            if (di == 0 and dj == 0) or di * di + dj * dj > n * n:
                continue
            euclid = spec.spacing * math.hypot(di, dj)
            for end in range(spec.heading_count):
                path = dubins_shortest((0.0, 0.0, th0), (di * spec.spacing, dj * spec.spacing, spec.heading(end)),
                                       spec.r_min)
                if path is None or path.length > spec.max_length_ratio * euclid:
                    continue
                dh = (end - start_heading) % spec.heading_count
                out.append((path.length, (di, dj, dh), path))
    return out


def generate_control_set(spec: LatticeSpec, footprint: ShipFootprint, grid_res: float) -> ControlSet:
    """Dubins primitives to nearby nodes, dominance-pruned, with precomputed swaths"""
    if grid_res <= 0:
        raise ConfigError(f"Grid resolution must be positive, got {grid_res}")
    cells = spec.spacing / grid_res
    if abs(cells - round(cells)) > 1e-9:
        raise ConfigError(f"Lattice spacing {spec.spacing} must be a multiple of the grid resolution {grid_res}")

    H = spec.heading_count
    quarter = H // 4
    base_classes = list(range(quarter))
    candidates = []
    for h in base_classes:
        candidates.extend((length, h, offset, path) for length, offset, path in _candidates(spec, h))
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))

    # shortest kept length per (start heading, di, dj, end heading) over all rotated classes
    best: Dict[Tuple[int, int, int, int], float] = {}
    kept_from: Dict[int, List[Tuple[int, int, int, float]]] = {h: [] for h in range(H)}
    kept = []
    for length, h, offset, path in candidates:
        di, dj, dh = offset
        end = (h + dh) % H
        dominated = False
        for pi, pj, p_end, p_len in kept_from[h]:
            rest = best.get((p_end, di - pi, dj - pj, end))
            if rest is not None and p_len + rest <= length + _PRUNE_TOL:
                dominated = True
                break
        if dominated:
            continue
        kept.append((length, h, offset, path))
        for turn in range(4):
            rh = (h + turn * quarter) % H
            ri, rj = _rotate_offset(offset, turn)
            r_end = (rh + dh) % H
            key = (rh, ri, rj, r_end)
            best[key] = min(best.get(key, math.inf), length)
            kept_from[rh].append((ri, rj, r_end, length))

    if not any(o[0] > 0 for _, h, o, _ in kept if h == 0):
        raise ConfigError("No motion primitive reaches a forward lattice node")

    step = grid_res / 2.0
    primitives: List[MotionPrimitive] = []
    for length, h, offset, path in kept:
        poses, curv = path.sample(step)
        poses[-1, :2] = (offset[0] * spec.spacing, offset[1] * spec.spacing)
        poses[-1, 2] = spec.heading(h + offset[2])
        swath = _relative_swath(poses, footprint, grid_res)
        for turn in range(4):
            rh = (h + turn * quarter) % H
            r_poses, r_swath = _rotate_quarter(poses, swath, turn)
            ri, rj = _rotate_offset(offset, turn)
            primitives.append(MotionPrimitive(
                id=len(primitives),
                start_heading=rh,
                offset=(ri, rj, offset[2]),
                poses=r_poses,
                curvatures=curv.copy(),
                length=length,
                swath=r_swath,
            ))

    by_heading = {
        h: tuple(sorted((p for p in primitives if p.start_heading == h), key=lambda p: p.length))
        for h in range(H)
    }
    logger.info(f"Control set: {len(primitives)} primitives over {H} headings "
                f"(spacing {spec.spacing} m, r_min {spec.r_min} m)")
    return ControlSet(spec=spec, grid_res=grid_res, primitives=tuple(primitives), by_heading=by_heading)


@lru_cache(maxsize=8)
def control_set_for(spec: LatticeSpec, footprint: ShipFootprint, grid_res: float) -> ControlSet:
    """Control set suite keyed by lattice spec (incl. r_min), footprint and grid resolution"""
    return generate_control_set(spec, footprint, grid_res)
