"""
Collision costmap: kinetic-energy-loss penalty times local ice concentration,
swath costs, and the smooth cost field the path optimizer descends.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.ndimage import uniform_filter

from ..core.errors import ConfigError, DomainError
from ..core.geometry import GridSpec, rasterize_polygon
from ..models.schemas import CostmapConfig
from ..simulation.icefield import IceField, occupancy_image

logger = logging.getLogger(__name__)

CLAMP_REL_EPS = 1e-6
RAMP_KNEE = 0.5


def _ke_factor(m_ice, m_ship: float, U: float):
    return m_ice * m_ship * (m_ice + 2.0 * m_ship) / (2.0 * (m_ice + m_ship) ** 2) * U ** 2


def ke_loss(d: float, r_ice: float, m_ice: float, m_ship: float, U: float) -> float:
    """
    Kinetic energy the ship loses hitting a floe of radius r_ice at offset d
    from its centroid (positive convention).
    """
    if r_ice <= 0:
        raise DomainError(f"Floe radius must be positive, got {r_ice}")
    if d < 0 or d > r_ice * (1.0 + 1e-12):
        raise DomainError(f"Offset {d} outside [0, {r_ice}]")
    if m_ice <= 0 or m_ship <= 0 or U < 0:
        raise DomainError("Masses must be positive and speed non-negative")
    d = min(d, r_ice)
    return float(_ke_factor(m_ice, m_ship, U) * (r_ice ** 2 - d ** 2) / r_ice ** 2)


@dataclass(frozen=True, eq=False)
class ConcentrationImage:
    values: np.ndarray
    kernel_size: int


def concentration_penalty(occupancy: np.ndarray, z: int, beta: float) -> ConcentrationImage:
    """Mean of the z×z neighbourhood (reflected at the image edges), raised to β"""
    if z < 1 or z % 2 == 0:
        raise ConfigError(f"Kernel size must be a positive odd integer, got {z}")
    mean = uniform_filter(np.asarray(occupancy, dtype=float), size=z, mode="reflect")
    values = np.clip(mean, 0.0, 1.0) ** beta
    return ConcentrationImage(values=values, kernel_size=z)


@dataclass(frozen=True, eq=False)
class Costmap:
    """Per-cell collision cost; obstacle_id is -1 where no scaled floe covers the cell"""

    grid: GridSpec
    cost: np.ndarray
    obstacle_id: np.ndarray

    @property
    def max_cost(self) -> float:
        return float(self.cost.max()) if self.cost.size else 0.0

    @classmethod
    def empty(cls, grid: GridSpec) -> "Costmap":
        return cls(grid, np.zeros(grid.shape), np.full(grid.shape, -1, dtype=np.int64))


def channel_grid(field_: IceField, resolution: float) -> GridSpec:
    return GridSpec.covering(0.0, 0.0, field_.channel_length, field_.channel_width, resolution)


def build_costmap(field_: IceField, U_nom: float, m_ship: float,
                  params: Optional[CostmapConfig] = None) -> Costmap:
    params = params or CostmapConfig()
    if params.kernel_size % 2 == 0:
        raise ConfigError(f"Kernel size must be odd, got {params.kernel_size}")
    grid = channel_grid(field_, params.resolution)
    costmap = Costmap.empty(grid)
    if not field_.floes:
        return costmap

    conc = concentration_penalty(occupancy_image(field_, grid), params.kernel_size, params.beta).values
    xs, ys = grid.cell_centers()
    cost, ids = costmap.cost, costmap.obstacle_id
    for floe in field_.floes:
        scaled = floe.polygon.scaled(1.0 + params.scale_factor, about=floe.centroid)
        cells = rasterize_polygon(scaled, grid)
        if len(cells) == 0:
            continue
        rows, cols = cells[:, 0], cells[:, 1]
        r = floe.bounding_radius
        d = np.minimum(np.hypot(xs[cols] - floe.centroid.x, ys[rows] - floe.centroid.y), r)
        values = _ke_factor(floe.mass, m_ship, U_nom) * (r ** 2 - d ** 2) / r ** 2 * conc[rows, cols]
        better = (values > cost[rows, cols]) | (ids[rows, cols] < 0)
        cost[rows[better], cols[better]] = values[better]
        ids[rows[better], cols[better]] = floe.id
    logger.debug(f"Built costmap {grid.n_rows}x{grid.n_cols}, max cost {costmap.max_cost:.3g}")
    return costmap


CellsLike = Union[np.ndarray, Iterable[Tuple[int, int]]]


def swath_cost(swath: CellsLike, map_: Costmap) -> float:
    """Sum of cell costs over the distinct cells of a swath; cells off the grid cost nothing"""
    cells = np.asarray(list(swath) if not isinstance(swath, np.ndarray) else swath, dtype=np.int64)
    if cells.size == 0:
        return 0.0
    cells = np.unique(cells.reshape(-1, 2), axis=0)
    inside = (
        (cells[:, 0] >= 0) & (cells[:, 0] < map_.grid.n_rows)
        & (cells[:, 1] >= 0) & (cells[:, 1] < map_.grid.n_cols)
    )
    cells = cells[inside]
    return float(map_.cost[cells[:, 0], cells[:, 1]].sum())


def _soft_clamp(s: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray]:
    """C¹ replacement for max(s, 0): cubic on [0, eps], identity above"""
    if eps <= 0.0:
        return np.maximum(s, 0.0), (s > 0).astype(float)
    t = np.clip(s, 0.0, eps)
    cubic = 2.0 * t ** 2 / eps - t ** 3 / eps ** 2
    cubic_d = 4.0 * t / eps - 3.0 * t ** 2 / eps ** 2
    value = np.where(s > eps, s, np.where(s < 0.0, 0.0, cubic))
    slope = np.where(s > eps, 1.0, np.where(s < 0.0, 0.0, cubic_d))
    return value, slope


def _ramp(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Quadratic up to the knee, linear after, normalised so the ramp is 1 at t = 1"""
    norm = 1.0 - RAMP_KNEE / 2.0
    value = np.where(t < RAMP_KNEE, t ** 2 / (2.0 * RAMP_KNEE), t - RAMP_KNEE / 2.0) / norm
    slope = np.where(t < RAMP_KNEE, t / RAMP_KNEE, 1.0) / norm
    return value, slope


class CostField:
    """
    Bicubic interpolant of a costmap with a quadratic-then-linear penalty
    ramp outside the channel's side walls. Total on the plane.
    """

    def __init__(self, map_: Costmap, boundary_penalty: float, boundary_margin: float):
        if boundary_margin <= 0:
            raise ConfigError(f"Boundary margin must be positive, got {boundary_margin}")
        self.map = map_
        self.boundary_penalty = float(boundary_penalty)
        self.boundary_margin = float(boundary_margin)
        grid = map_.grid
        self.y_low, self.y_high = grid.origin.y, grid.y_max

        xs, ys = grid.cell_centers()
        res = grid.resolution
        # one edge-copied layer so the channel edges sit strictly inside the knot span
        xs = np.concatenate([[xs[0] - res], xs, [xs[-1] + res]])
        ys = np.concatenate([[ys[0] - res], ys, [ys[-1] + res]])
        values = np.pad(map_.cost, 1, mode="edge")
        self._x_range = (xs[0], xs[-1])
        self._y_range = (ys[0], ys[-1])
        self._spline = RectBivariateSpline(ys, xs, values, kx=min(3, len(ys) - 1),
                                           ky=min(3, len(xs) - 1), s=0)
        self._eps = CLAMP_REL_EPS * map_.max_cost

    def evaluate(self, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorised (value, ∂/∂x, ∂/∂y) at points (x, y)"""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        xc = np.clip(x, *self._x_range)
        yc = np.clip(y, self.y_low, self.y_high)
        raw = self._spline.ev(yc, xc)
        raw_dx = np.where(xc == x, self._spline.ev(yc, xc, dy=1), 0.0)
        raw_dy = np.where(yc == y, self._spline.ev(yc, xc, dx=1), 0.0)
        value, slope = _soft_clamp(raw, self._eps)
        gx, gy = slope * raw_dx, slope * raw_dy

        below = np.maximum(self.y_low - y, 0.0) / self.boundary_margin
        above = np.maximum(y - self.y_high, 0.0) / self.boundary_margin
        ramp_b, slope_b = _ramp(below)
        ramp_a, slope_a = _ramp(above)
        value = value + self.boundary_penalty * (ramp_b + ramp_a)
        gy = gy + self.boundary_penalty / self.boundary_margin * (slope_a - slope_b)
        return value, gx, gy

    def eval(self, x: float, y: float) -> Tuple[float, np.ndarray]:
        value, gx, gy = self.evaluate(x, y)
        return float(value), np.array([float(gx), float(gy)])


def cost_field(map_: Costmap, boundary_penalty: Optional[float] = None,
               boundary_margin: Optional[float] = None,
               params: Optional[CostmapConfig] = None, ship_width: float = 18.0) -> CostField:
    """Cost field with the penalty defaulting to max(10·max cost, floor) and the margin to a ship width"""
    params = params or CostmapConfig()
    if boundary_penalty is None:
        boundary_penalty = max(params.boundary_penalty_factor * map_.max_cost, params.min_boundary_penalty)
    if boundary_margin is None:
        boundary_margin = params.boundary_margin or ship_width
    return CostField(map_, boundary_penalty, boundary_margin)


def save_costmap(map_: Costmap, path: str):
    """JSON header next to a .npy cost grid"""
    header_path = Path(path).with_suffix(".json")
    data_path = Path(path).with_suffix(".npy")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    np.save(data_path, map_.cost)
    header = {
        "resolution": map_.grid.resolution,
        "origin": [map_.grid.origin.x, map_.grid.origin.y],
        "dims": [map_.grid.n_rows, map_.grid.n_cols],
        "max_cost": map_.max_cost,
        "data": data_path.name,
    }
    header_path.write_text(json.dumps(header, indent=2))
    logger.debug(f"Saved costmap to {header_path}")
