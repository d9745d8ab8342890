"""
Admissible A* heuristics: the shortest curvature-bounded path to the goal
line, and an obstacles-only lower bound on the collision cost still to pay.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..core.errors import ConfigError
from ..core.geometry import wrap_to_pi
from .costmap import Costmap


def h1_dubins_to_line(x: float, psi: float, x_goal: float, r_min: float) -> float:
    """Length of the turn-then-straight path from (x, ψ) to the line x = x_goal"""
    if x >= x_goal:
        return 0.0
    phi = math.pi / 2.0 - abs(wrap_to_pi(psi))
    x_c = x + r_min * abs(math.cos(phi))
    if x_c <= x_goal:
        return r_min * abs(math.pi / 2.0 - phi) + x_goal - x_c
    return r_min * abs(phi - math.acos(min(1.0, (x_c - x_goal) / r_min)))


def window_minima(cost: np.ndarray, w: int) -> np.ndarray:
    """Per column, the smallest sum over w consecutive rows"""
    n_rows = cost.shape[0]
    if n_rows == 0 or cost.shape[1] == 0:
        return np.zeros(cost.shape[1])
    w = min(w, n_rows)
    csum = np.vstack([np.zeros((1, cost.shape[1])), np.cumsum(cost, axis=0)])
    sums = csum[w:] - csum[:-w]
    return np.maximum(sums.min(axis=0), 0.0)


@dataclass(frozen=True, eq=False)
class ObstaclesOnlyHeuristic:
    """Cumulative column minima; query(x, x_goal) sums the columns from x's up to x_goal's"""

    map: Costmap
    w_cells: int
    column_min: np.ndarray
    prefix: np.ndarray

    @classmethod
    def build(cls, map_: Costmap, w_cells: int) -> "ObstaclesOnlyHeuristic":
        if w_cells < 1:
            raise ConfigError(f"Window must cover at least one cell, got {w_cells}")
        column_min = window_minima(map_.cost, w_cells)
        prefix = np.concatenate([[0.0], np.cumsum(column_min)])
        return cls(map_, w_cells, column_min, prefix)

    @classmethod
    def for_ship(cls, map_: Costmap, ship_width: float) -> "ObstaclesOnlyHeuristic":
        return cls.build(map_, int(math.ceil(ship_width / map_.grid.resolution - 1e-9)))

    def _column(self, x: float) -> int:
        return min(max(self.map.grid.col_of(x), 0), self.map.grid.n_cols)

    def query(self, x: float, x_goal: float) -> float:
        c_node, c_goal = self._column(x), self._column(x_goal)
        if c_goal <= c_node:
            return 0.0
        return float(self.prefix[c_goal] - self.prefix[c_node])
