"""
Planar geometry shared by the planners, the simulator and the harness.

Coordinates are meters in the inertial frame. The channel runs along +x,
cross-channel is +y. Cell index arrays are (row, col) pairs where the row
indexes y and the column indexes x.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import MultiPoint, Polygon
from shapely.geometry.base import BaseGeometry
from shapely.geometry.polygon import orient

from .errors import ConfigError, DegenerateInput

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
DEDUP_TOL = 1e-9
_AREA_EPS = 1e-12


def wrap_angle(psi):
    """Wrap an angle (scalar or array) to [0, 2π)"""
    wrapped = np.mod(psi, TWO_PI)
    if np.ndim(wrapped) == 0:
        wrapped = float(wrapped)
        return 0.0 if wrapped >= TWO_PI else wrapped
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)


def wrap_to_pi(psi):
    """Wrap an angle (scalar or array) to (-π, π]"""
    wrapped = np.pi - np.mod(np.pi - np.asarray(psi, dtype=float), TWO_PI)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def rotation_matrix(psi: float) -> np.ndarray:
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DegenerateInput(f"Non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Pose:
    """Ship configuration (x, y, ψ) with ψ wrapped to [0, 2π)"""

    x: float
    y: float
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "psi", wrap_angle(float(self.psi)))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.psi])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Pose":
        return cls(float(values[0]), float(values[1]), float(values[2]))


def _cross_z(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """
    Convex polygon with counter-clockwise vertices.

    Construction deduplicates vertices closer than 1e-9 m, drops a closing
    vertex, orients the ring counter-clockwise and removes collinear vertices.
    Anything that is not strictly convex afterwards is rejected.
    """

    vertices: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or not np.all(np.isfinite(pts)):
            raise DegenerateInput("Polygon vertices must be a finite (n, 2) array")

        # consecutive duplicates, including the closing vertex
        keep = [0]
        for i in range(1, len(pts)):
            if np.linalg.norm(pts[i] - pts[keep[-1]]) > DEDUP_TOL:
                keep.append(i)
        pts = pts[keep]
        if len(pts) > 1 and np.linalg.norm(pts[-1] - pts[0]) <= DEDUP_TOL:
            pts = pts[:-1]
        if len(pts) < 3:
            raise DegenerateInput(f"Polygon needs at least 3 distinct vertices, got {len(pts)}")

        rel = pts - pts.mean(axis=0)
        if np.sum(_cross_z(rel, np.roll(rel, -1, axis=0))) < 0:
            pts = pts[::-1]

        # collinear vertices
        scale = max(1.0, float(np.ptp(pts, axis=0).max()) ** 2)
        changed = True
        while changed and len(pts) >= 3:
            changed = False
            prev_edge = pts - np.roll(pts, 1, axis=0)
            next_edge = np.roll(pts, -1, axis=0) - pts
            cross = _cross_z(prev_edge, next_edge)
            flat = np.abs(cross) <= 1e-12 * scale
            if np.any(flat):
                pts = pts[~flat] if np.count_nonzero(~flat) >= 3 else pts[:0]
                changed = True
        if len(pts) < 3:
            raise DegenerateInput("Polygon vertices are collinear")

        prev_edge = pts - np.roll(pts, 1, axis=0)
        next_edge = np.roll(pts, -1, axis=0) - pts
        if np.any(_cross_z(prev_edge, next_edge) <= 0.0):
            raise DegenerateInput("Polygon is not strictly convex")
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    def __len__(self) -> int:
        return len(self.vertices)

    @classmethod
    def from_shapely(cls, poly: Polygon) -> "ConvexPolygon":
        ring = np.asarray(orient(poly, sign=1.0).exterior.coords)[:-1]
        return cls(ring)

    def to_shapely(self) -> Polygon:
        return Polygon(self.vertices)

    def translated(self, dx: float, dy: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.array([dx, dy]))

    def transformed(self, pose: Pose) -> "ConvexPolygon":
        """Body-frame polygon placed at a world pose"""
        return ConvexPolygon(transform_points(self.vertices, pose.x, pose.y, pose.psi))

    def scaled(self, factor: float, about: Optional[Point2] = None) -> "ConvexPolygon":
        if factor <= 0:
            raise ConfigError(f"Scale factor must be positive, got {factor}")
        centre = polygon_properties(self).centroid if about is None else about
        c = centre.as_array()
        return ConvexPolygon(c + factor * (self.vertices - c))


def transform_points(points: np.ndarray, x: float, y: float, psi: float) -> np.ndarray:
    """Rotate body-frame points by ψ and translate by (x, y)"""
    return np.asarray(points) @ rotation_matrix(psi).T + np.array([x, y])


@dataclass(frozen=True)
class PolygonProperties:
    area: float
    centroid: Point2
    bounding_radius: float


def convex_hull(points: Sequence[Sequence[float]]) -> ConvexPolygon:
    """Minimal counter-clockwise convex hull of a point set"""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < 3:
        raise DegenerateInput("Convex hull needs at least 3 points")
    hull = MultiPoint(pts).convex_hull
    if hull.geom_type != "Polygon" or hull.area <= _AREA_EPS:
        raise DegenerateInput("Convex hull of collinear points")
    return ConvexPolygon.from_shapely(hull)


def polygon_properties(p: ConvexPolygon) -> PolygonProperties:
    """Shoelace area, area-weighted centroid and bounding radius about the centroid"""
    shift = p.vertices[0]
    v = p.vertices - shift
    vn = np.roll(v, -1, axis=0)
    cross = _cross_z(v, vn)
    area = 0.5 * float(np.sum(cross))
    if area <= _AREA_EPS:
        raise DegenerateInput(f"Polygon has zero area ({area})")
    cx = float(np.sum((v[:, 0] + vn[:, 0]) * cross)) / (6.0 * area)
    cy = float(np.sum((v[:, 1] + vn[:, 1]) * cross)) / (6.0 * area)
    centroid = np.array([cx, cy]) + shift
    radius = float(np.max(np.linalg.norm(p.vertices - centroid, axis=1)))
    return PolygonProperties(area=area, centroid=Point2(float(centroid[0]), float(centroid[1])),
                             bounding_radius=radius)


def polygon_inertia(p: ConvexPolygon, mass: float) -> float:
    """Polar moment of inertia about the centroid for a uniform lamina"""
    c = polygon_properties(p).centroid.as_array()
    v = p.vertices - c
    vn = np.roll(v, -1, axis=0)
    cross = _cross_z(v, vn)
    terms = np.sum(v * v, axis=1) + np.sum(v * vn, axis=1) + np.sum(vn * vn, axis=1)
    return float(mass * np.sum(cross * terms) / (6.0 * np.sum(cross)))


@dataclass(frozen=True)
class ShipFootprint:
    """Ship outline in the body frame, bow along +x"""

    outline: ConvexPolygon
    length: float
    width: float

    def __post_init__(self):
        if not self.outline.to_shapely().contains(shapely.Point(0.0, 0.0)):
            raise ConfigError("Footprint origin must lie inside the outline")
        if float(self.outline.vertices[:, 0].max()) <= 0.0:
            raise ConfigError("Footprint bow must be at positive x")

    @classmethod
    def default(cls, length: float = 76.2, width: float = 18.0, bow_length: float = 15.0) -> "ShipFootprint":
        """Rectangular hull with a triangular bow, origin at the hull midpoint"""
        half_l, half_w = length / 2.0, width / 2.0
        outline = ConvexPolygon(np.array([
            [-half_l, -half_w],
            [half_l - bow_length, -half_w],
            [half_l, 0.0],
            [half_l - bow_length, half_w],
            [-half_l, half_w],
        ]))
        return cls(outline=outline, length=length, width=width)

    def world_vertices(self, pose: Pose) -> np.ndarray:
        return transform_points(self.outline.vertices, pose.x, pose.y, pose.psi)

    def at(self, pose: Pose) -> Polygon:
        return Polygon(self.world_vertices(pose))

    def at_poses(self, poses: np.ndarray) -> np.ndarray:
        """Vectorised placement: array of shapely polygons, one per pose row"""
        poses = np.atleast_2d(poses)
        c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
        bx, by = self.outline.vertices[:, 0], self.outline.vertices[:, 1]
        wx = poses[:, :1] + c[:, None] * bx - s[:, None] * by
        wy = poses[:, 1:2] + s[:, None] * bx + c[:, None] * by
        return shapely.polygons(np.stack([wx, wy], axis=-1))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid; cell (r, c) spans [ox + c·res, ox + (c+1)·res] × [oy + r·res, oy + (r+1)·res]"""

    resolution: float
    n_rows: int
    n_cols: int
    origin: Point2 = field(default_factory=lambda: Point2(0.0, 0.0))

    def __post_init__(self):
        if not self.resolution > 0:
            raise ConfigError(f"Grid resolution must be positive, got {self.resolution}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ConfigError(f"Grid must have at least one cell, got {self.n_rows}x{self.n_cols}")

    @classmethod
    def covering(cls, x_min: float, y_min: float, x_max: float, y_max: float,
                 resolution: float) -> "GridSpec":
        n_cols = max(1, int(math.ceil((x_max - x_min) / resolution - 1e-9)))
        n_rows = max(1, int(math.ceil((y_max - y_min) / resolution - 1e-9)))
        return cls(resolution=resolution, n_rows=n_rows, n_cols=n_cols, origin=Point2(x_min, y_min))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def x_max(self) -> float:
        return self.origin.x + self.n_cols * self.resolution

    @property
    def y_max(self) -> float:
        return self.origin.y + self.n_rows * self.resolution

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x centres per column, y centres per row)"""
        xs = self.origin.x + (np.arange(self.n_cols) + 0.5) * self.resolution
        ys = self.origin.y + (np.arange(self.n_rows) + 0.5) * self.resolution
        return xs, ys

    def col_of(self, x: float) -> int:
        return int(math.floor((x - self.origin.x) / self.resolution))

    def row_of(self, y: float) -> int:
        return int(math.floor((y - self.origin.y) / self.resolution))

    def shifted(self, dx: float, dy: float) -> "GridSpec":
        return GridSpec(self.resolution, self.n_rows, self.n_cols,
                        Point2(self.origin.x + dx, self.origin.y + dy))


@dataclass(frozen=True, eq=False)
class PlannedPath:
    """Pose sequence (n, 3) ordered by arc length, with optional primitive ids per segment"""

    poses: np.ndarray
    primitive_ids: Tuple[int, ...] = ()

    def __post_init__(self):
        poses = np.atleast_2d(np.asarray(self.poses, dtype=float))
        if poses.shape[1] != 3 or len(poses) < 1:
            raise DegenerateInput("Path poses must be a non-empty (n, 3) array")
        if not np.all(np.isfinite(poses)):
            raise DegenerateInput("Path poses must be finite")
        object.__setattr__(self, "poses", poses)

    def __len__(self) -> int:
        return len(self.poses)

    def arc_lengths(self) -> np.ndarray:
        seg = np.linalg.norm(np.diff(self.poses[:, :2], axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.arc_lengths()[-1])

    @property
    def start(self) -> Pose:
        return Pose.from_array(self.poses[0])

    @property
    def end(self) -> Pose:
        return Pose.from_array(self.poses[-1])

    def interpolate(self, s: np.ndarray) -> np.ndarray:
        """Poses at arc lengths s (clamped to the path), headings interpolated unwrapped"""
        s_all = self.arc_lengths()
        s = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), 0.0, s_all[-1])
        if len(self.poses) == 1:
            return np.repeat(self.poses[:1], len(s), axis=0)
        psi = np.unwrap(self.poses[:, 2])
        out = np.column_stack([
            np.interp(s, s_all, self.poses[:, 0]),
            np.interp(s, s_all, self.poses[:, 1]),
            np.interp(s, s_all, psi),
        ])
        out[:, 2] = wrap_angle(out[:, 2])
        return out

    def resample(self, max_spacing: float) -> "PlannedPath":
        """Uniform arc-length resampling with spacing no larger than max_spacing"""
        total = self.length
        if total <= 0.0:
            return PlannedPath(self.poses[:1].copy())
        n = max(1, int(math.ceil(total / max_spacing - 1e-12)))
        return PlannedPath(self.interpolate(np.linspace(0.0, total, n + 1)))

    def truncate_at_x(self, x_stop: float) -> "PlannedPath":
        """Cut the path at its first crossing of the line x = x_stop"""
        xs = self.poses[:, 0]
        crossing = np.nonzero(xs >= x_stop)[0]
        if len(crossing) == 0 or crossing[0] == 0:
            return self
        k = int(crossing[0])
        a, b = self.poses[k - 1], self.poses[k]
        t = (x_stop - a[0]) / (b[0] - a[0]) if b[0] != a[0] else 1.0
        dpsi = wrap_to_pi(b[2] - a[2])
        last = np.array([x_stop, a[1] + t * (b[1] - a[1]), wrap_angle(a[2] + t * dpsi)])
        return PlannedPath(np.vstack([self.poses[:k], last]))

    def reversed(self) -> "PlannedPath":
        poses = self.poses[::-1].copy()
        poses[:, 2] = wrap_angle(poses[:, 2] + math.pi)
        return PlannedPath(poses)


def rasterize_geometry(geom: BaseGeometry, grid: GridSpec) -> np.ndarray:
    """Cells (row, col) whose square overlaps the geometry with positive area"""
    empty = np.zeros((0, 2), dtype=np.int64)
    if geom.is_empty:
        return empty
    res = grid.resolution
    x_min, y_min, x_max, y_max = geom.bounds
    c0 = max(int(math.floor((x_min - grid.origin.x) / res)), 0)
    c1 = min(int(math.floor((x_max - grid.origin.x) / res)), grid.n_cols - 1)
    r0 = max(int(math.floor((y_min - grid.origin.y) / res)), 0)
    r1 = min(int(math.floor((y_max - grid.origin.y) / res)), grid.n_rows - 1)
    if c0 > c1 or r0 > r1:
        return empty

    cc, rr = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cc, rr = cc.ravel(), rr.ravel()
    x0 = grid.origin.x + cc * res
    y0 = grid.origin.y + rr * res
    boxes = shapely.box(x0, y0, x0 + res, y0 + res)
    shapely.prepare(geom)
    hit = shapely.intersects(geom, boxes)
    if not np.any(hit):
        return empty
    areas = shapely.area(shapely.intersection(boxes[hit], geom))
    keep = areas > _AREA_EPS * res * res
    return np.column_stack([rr[hit][keep], cc[hit][keep]]).astype(np.int64)


def rasterize_polygon(p: ConvexPolygon, grid: GridSpec) -> np.ndarray:
    """Cells whose square overlaps the polygon with positive area"""
    return rasterize_geometry(p.to_shapely(), grid)


def swath_geometry(path: PlannedPath, footprint: ShipFootprint, spacing: float) -> BaseGeometry:
    """Union of footprints placed along the path at arc-length spacing ≤ spacing"""
    poses = path.resample(spacing).poses
    return shapely.union_all(footprint.at_poses(poses))


def swath_trace(path: PlannedPath, footprint: ShipFootprint, grid: GridSpec) -> np.ndarray:
    """Cells swept by the footprint along the path, sampled every Δ_grid/2"""
    return rasterize_geometry(swath_geometry(path, footprint, grid.resolution / 2.0), grid)


def cells_to_set(cells: np.ndarray) -> set:
    return {(int(r), int(c)) for r, c in np.asarray(cells)}
