"""
Stage-1 planner: A* over the state lattice minimising path length plus
α times the swath collision cost.
"""

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from itertools import count
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..core.config import settings
from ..core.errors import NoPathFound
from ..core.geometry import PlannedPath, Pose
from .control_set import ControlSet, MotionPrimitive
from .costmap import Costmap
from .heuristics import ObstaclesOnlyHeuristic, h1_dubins_to_line

logger = logging.getLogger(__name__)

Node = Tuple[int, int, int]

_debug_counter = count()


@dataclass(frozen=True, eq=False)
class PlannerResult:
    path: PlannedPath
    length: float
    collision_cost: float
    objective: float
    nodes_expanded: int = 0
    nodes: Tuple[Node, ...] = field(default=(), repr=False)


class EdgeCoster:
    """Swath costs of primitives placed at lattice nodes, memoised per (node, primitive)"""

    def __init__(self, map_: Costmap, cs: ControlSet, start: Pose):
        grid = map_.grid
        res = grid.resolution
        self.map = map_
        self.step = cs.cells_per_spacing
        # lattice anchored at the cell corner nearest the start
        self.col0 = int(round((start.x - grid.origin.x) / res))
        self.row0 = int(round((start.y - grid.origin.y) / res))
        self._memo: Dict[Tuple[int, int, int], float] = {}

    def cost(self, node: Node, prim: MotionPrimitive) -> float:
        """Swath cost, inf when the swath leaves the channel sideways"""
        key = (node[0], node[1], prim.id)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        rows = prim.swath[:, 0] + self.row0 + node[1] * self.step
        cols = prim.swath[:, 1] + self.col0 + node[0] * self.step
        grid = self.map.grid
        if rows.size and (rows.min() < 0 or rows.max() >= grid.n_rows):
            value = math.inf
        else:
            inside = (cols >= 0) & (cols < grid.n_cols)
            value = float(self.map.cost[rows[inside], cols[inside]].sum())
        self._memo[key] = value
        return value


def _node_pose(start: Pose, node: Node, cs: ControlSet) -> Tuple[float, float, float]:
    sp = cs.spec.spacing
    return start.x + node[0] * sp, start.y + node[1] * sp, cs.spec.heading(node[2])


def _reconstruct(start: Pose, goal: Node, came_from: Dict[Node, Tuple[Node, MotionPrimitive]],
                 cs: ControlSet) -> Tuple[List[Node], PlannedPath]:
    nodes = [goal]
    prims: List[MotionPrimitive] = []
    while nodes[-1] in came_from:
        parent, prim = came_from[nodes[-1]]
        nodes.append(parent)
        prims.append(prim)
    nodes.reverse()
    prims.reverse()

    if not prims:
        return nodes, PlannedPath(np.array([_node_pose(start, goal, cs)]))
    pieces = []
    for i, (parent, prim) in enumerate(zip(nodes, prims)):
        x, y, _ = _node_pose(start, parent, cs)
        poses = prim.poses.copy()
        poses[:, 0] += x
        poses[:, 1] += y
        pieces.append(poses if i == 0 else poses[1:])
    return nodes, PlannedPath(np.vstack(pieces), tuple(p.id for p in prims))


def _dump_debug(result: PlannerResult):
    out = Path(settings.results_dir) / "debug" / f"plan_{next(_debug_counter):04d}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps({
        "nodes_expanded": result.nodes_expanded,
        "J": result.objective,
        "L_f": result.length,
        "C_f": result.collision_cost,
        "poses": result.path.poses.tolist(),
    }))


def plan_path(start: Pose, x_subgoal: float, map_: Costmap, cs: ControlSet, alpha: float,
              ship_width: Optional[float] = None, use_heuristic: bool = True,
              max_expansions: int = 200_000) -> PlannerResult:
    """
    Minimum J = L + α·C lattice path from the start pose to the first node
    at or beyond x_subgoal.

    The lattice is initialised at the start position with the nearest lattice
    heading. A* re-opens nodes when a cheaper route is found, so it matches
    Dijkstra (use_heuristic=False) on the same graph. Without a ship width the
    obstacles-only bound falls back to single-cell windows.
    """
    if x_subgoal <= start.x:
        raise NoPathFound(f"Subgoal x={x_subgoal} is not ahead of the start x={start.x}")
    spec = cs.spec
    edges = EdgeCoster(map_, cs, start)
    h2: Optional[ObstaclesOnlyHeuristic] = None
    if use_heuristic:
        h2 = (ObstaclesOnlyHeuristic.for_ship(map_, ship_width) if ship_width
              else ObstaclesOnlyHeuristic.build(map_, 1))

    def heuristic(node: Node) -> float:
        if h2 is None:
            return 0.0
        x, _, psi = _node_pose(start, node, cs)
        return h1_dubins_to_line(x, psi, x_subgoal, spec.r_min) + alpha * h2.query(x, x_subgoal)

    start_node: Node = (0, 0, spec.nearest_heading(start.psi))
    g: Dict[Node, float] = {start_node: 0.0}
    g_len: Dict[Node, float] = {start_node: 0.0}
    g_cost: Dict[Node, float] = {start_node: 0.0}
    came_from: Dict[Node, Tuple[Node, MotionPrimitive]] = {}
    open_heap = [(heuristic(start_node), 0.0, start_node, 0.0)]
    expanded = 0

    while open_heap:
        _, _, node, g_pushed = heapq.heappop(open_heap)
        if g_pushed > g[node]:
            continue
        if start.x + node[0] * spec.spacing >= x_subgoal:
            nodes, path = _reconstruct(start, node, came_from, cs)
            result = PlannerResult(path=path, length=g_len[node], collision_cost=g_cost[node],
                                   objective=g[node], nodes_expanded=expanded, nodes=tuple(nodes))
            logger.debug(f"Lattice search expanded {expanded} nodes: J={result.objective:.2f} "
                         f"L={result.length:.1f} C={result.collision_cost:.3g}")
            if settings.planner_debug:
                _dump_debug(result)
            return result

        expanded += 1
        if expanded > max_expansions:
            break
        for prim in cs.by_heading[node[2]]:
            swath = edges.cost(node, prim)
            if not math.isfinite(swath):
                continue
            di, dj, dh = prim.offset
            child = (node[0] + di, node[1] + dj, (node[2] + dh) % spec.heading_count)
            tentative = g[node] + prim.length + alpha * swath
            if tentative < g.get(child, math.inf):
                g[child] = tentative
                g_len[child] = g_len[node] + prim.length
                g_cost[child] = g_cost[node] + swath
                came_from[child] = (node, prim)
                heapq.heappush(open_heap, (tentative + heuristic(child), g_cost[child], child, tentative))

    raise NoPathFound(
        f"No lattice path from ({start.x:.1f}, {start.y:.1f}) to x={x_subgoal:.1f} "
        f"after {expanded} expansions"
    )
