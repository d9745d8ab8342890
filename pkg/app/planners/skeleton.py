"""
Skeleton baseline: route along the medial skeleton of open water, eroding the
floes until a connected route to the subgoal exists, then smooth it into a
curvature-bounded path.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from shapely.geometry import LineString, Point
from skimage.morphology import binary_erosion, skeletonize

from ..core.errors import ConfigError, PlanningFailure
from ..core.geometry import GridSpec, PlannedPath, Point2, Pose, wrap_to_pi
from ..simulation.icefield import IceField, occupancy_image
from .path_optimizer import rk4_unicycle_step

logger = logging.getLogger(__name__)

_NEIGHBOURS = ((0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True, eq=False)
class SkeletonPlan:
    path: PlannedPath
    route: np.ndarray
    erosions: int
    skeleton: Optional[np.ndarray] = None
    grid: Optional[GridSpec] = None


def skeleton_region(start: Pose, x_subgoal: float, channel_width: float, resolution: float) -> GridSpec:
    """Channel slice padded by one channel width behind the ship and beyond the subgoal"""
    pad = channel_width
    x0 = math.floor((start.x - pad) / resolution) * resolution
    n_cols = int(math.ceil((x_subgoal + pad - x0) / resolution - 1e-9))
    n_rows = int(math.ceil(channel_width / resolution - 1e-9))
    return GridSpec(resolution, n_rows, n_cols, Point2(x0, 0.0))


def skeleton_graph(skeleton: np.ndarray, resolution: float) -> Tuple[coo_matrix, np.ndarray]:
    """8-connected pixel graph with Euclidean edge weights; returns (graph, pixel (row, col) per node)"""
    pixels = np.argwhere(skeleton)
    index = -np.ones(skeleton.shape, dtype=np.int64)
    index[pixels[:, 0], pixels[:, 1]] = np.arange(len(pixels))
    rows, cols, weights = [], [], []
    n_rows, n_cols = skeleton.shape
    for dr, dc in _NEIGHBOURS:
        r2, c2 = pixels[:, 0] + dr, pixels[:, 1] + dc
        ok = (r2 >= 0) & (r2 < n_rows) & (c2 >= 0) & (c2 < n_cols)
        src = np.nonzero(ok)[0]
        dst = index[r2[ok], c2[ok]]
        hit = dst >= 0
        rows.append(src[hit])
        cols.append(dst[hit])
        weights.append(np.full(int(hit.sum()), resolution * math.hypot(dr, dc)))
    n = len(pixels)
    graph = coo_matrix((np.concatenate(weights), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return graph.tocsr(), pixels


def _route_on_skeleton(free: np.ndarray, grid: GridSpec, start: Pose, x_subgoal: float):
    skeleton = skeletonize(free)
    if not skeleton.any():
        return None, skeleton
    graph, pixels = skeleton_graph(skeleton, grid.resolution)
    xs, ys = grid.cell_centers()
    px, py = xs[pixels[:, 1]], ys[pixels[:, 0]]
    source = int(np.argmin(np.hypot(px - start.x, py - start.y)))
    dist, pred = dijkstra(graph, directed=False, indices=source, return_predecessors=True)
    goal_col = min(grid.col_of(x_subgoal), grid.n_cols - 1)
    targets = np.nonzero((pixels[:, 1] == goal_col) & np.isfinite(dist))[0]
    if len(targets) == 0:
        targets = np.nonzero((px >= x_subgoal) & np.isfinite(dist))[0]
    if len(targets) == 0:
        return None, skeleton
    node = int(targets[np.argmin(dist[targets])])
    chain = [node]
    while chain[-1] != source:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    route = np.column_stack([px[chain], py[chain]])
    return np.vstack([[start.x, start.y], route]), skeleton


def _segment_free(a: np.ndarray, b: np.ndarray, free: np.ndarray, grid: GridSpec) -> bool:
    n = max(2, int(math.ceil(np.linalg.norm(b - a) / (0.5 * grid.resolution))) + 1)
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = a + t * (b - a)
    cols = np.floor((pts[:, 0] - grid.origin.x) / grid.resolution).astype(int)
    rows = np.floor((pts[:, 1] - grid.origin.y) / grid.resolution).astype(int)
    inside = (rows >= 0) & (rows < grid.n_rows) & (cols >= 0) & (cols < grid.n_cols)
    return bool(np.all(free[rows[inside], cols[inside]]))


def shortcut_route(route: np.ndarray, free: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Greedy shortcutting: from each kept vertex jump to the farthest vertex in line of sight"""
    if len(route) <= 2:
        return route
    kept = [0]
    i = 0
    while i < len(route) - 1:
        j = len(route) - 1
        while j > i + 1 and not _segment_free(route[i], route[j], free, grid):
            j -= 1
        kept.append(j)
        i = j
    return route[kept]


def pursue_route(route: np.ndarray, start: Pose, x_subgoal: float, r_min: float, ds: float,
                 lookahead: Optional[float] = None) -> PlannedPath:
    """
    Pure-pursuit rollout along the route with curvature clipped to 1/r_min,
    stopped on the line x = x_subgoal.
    """
    if r_min <= 0 or ds <= 0:
        raise ConfigError("r_min and ds must be positive")
    lookahead = lookahead or 0.5 * r_min
    tail = route[-1] + np.array([2.0 * lookahead + ds, 0.0])
    line = LineString(np.vstack([route, tail]))
    budget = int(math.ceil(3.0 * (line.length + abs(x_subgoal - start.x)) / ds)) + 100
    kappa_max = 1.0 / r_min

    poses = [start.as_array()]
    for _ in range(budget):
        x, y, psi = poses[-1]
        if x >= x_subgoal:
            break
        s = line.project(Point(x, y))
        target = line.interpolate(min(s + lookahead, line.length))
        bearing = math.atan2(target.y - y, target.x - x)
        dist = max(math.hypot(target.x - x, target.y - y), 1e-9)
        kappa = float(np.clip(2.0 * math.sin(wrap_to_pi(bearing - psi)) / dist, -kappa_max, kappa_max))
        poses.append(rk4_unicycle_step(poses[-1], kappa, ds))
    else:
        raise PlanningFailure(f"Skeleton path tracking did not reach x={x_subgoal:.1f}")
    poses = np.array(poses)
    poses[:, 2] = np.mod(poses[:, 2], 2.0 * math.pi)
    return PlannedPath(poses).truncate_at_x(x_subgoal)


def plan_skeleton(start: Pose, x_subgoal: float, field_: IceField, r_min: float, resolution: float,
                  ds: float = 2.0) -> SkeletonPlan:
    """
    Skeleton route from the ship to the subgoal line.

    When the skeleton has no connected route, floes are eroded by one cell and
    the search repeats until a route appears.
    """
    if x_subgoal <= start.x:
        raise PlanningFailure(f"Subgoal x={x_subgoal} is not ahead of the ship x={start.x}")
    grid = skeleton_region(start, x_subgoal, field_.channel_width, resolution)
    occupied = occupancy_image(field_, grid)
    erosions = 0
    while True:
        free = ~occupied
        route, skeleton = _route_on_skeleton(free, grid, start, x_subgoal)
        if route is not None:
            break
        if not occupied.any():
            raise PlanningFailure("No skeleton route even after eroding every floe")
        eroded = binary_erosion(occupied)
        if np.array_equal(eroded, occupied):
            raise PlanningFailure("Erosion no longer shrinks the floes and no skeleton route exists")
        occupied = eroded
        erosions += 1
        logger.debug(f"Skeleton disconnected; eroded floes {erosions} time(s)")

    route = shortcut_route(route, free, grid)
    path = pursue_route(route, start, x_subgoal, r_min, ds)
    logger.debug(f"Skeleton plan: {len(route)} route vertices, {erosions} erosion(s), length {path.length:.1f} m")
    return SkeletonPlan(path=path, route=route, erosions=erosions, skeleton=skeleton, grid=grid)
