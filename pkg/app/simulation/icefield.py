"""
Random ice field generation: log-normal floe sizes, tangent circle packing,
random convex polygons inside the circles, random removal down to a target
concentration. Also occupancy imaging and the ice-field JSON format.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import shapely
from pydantic import ValidationError
from scipy import stats
from scipy.spatial import cKDTree

from ..core.errors import ConfigError, DegenerateInput, PackingFailure
from ..core.geometry import ConvexPolygon, GridSpec, Point2, polygon_properties, rasterize_polygon
from ..models.schemas import ExperimentConfig, IceConfig, IceFieldFile, MassDistribution

logger = logging.getLogger(__name__)

MIN_SIDES = 5
MAX_SIDES = 20
SHAPE_DRAWS = 3
MAX_PACKING_ATTEMPTS = 3
MAX_CONSECUTIVE_MISSES = 60
CONCENTRATION_TOL = 0.005
_TANGENT_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class IceFloe:
    id: int
    polygon: ConvexPolygon
    thickness: float
    density: float
    circle_center: Optional[Point2] = None
    circle_radius: Optional[float] = None
    area: float = field(init=False)
    mass: float = field(init=False)
    centroid: Point2 = field(init=False)
    bounding_radius: float = field(init=False)

    def __post_init__(self):
        props = polygon_properties(self.polygon)
        object.__setattr__(self, "area", props.area)
        object.__setattr__(self, "mass", self.density * self.thickness * props.area)
        object.__setattr__(self, "centroid", props.centroid)
        object.__setattr__(self, "bounding_radius", props.bounding_radius)

    @property
    def effective_width(self) -> float:
        return math.sqrt(self.area)


@dataclass(frozen=True, eq=False)
class IceField:
    channel_length: float
    channel_width: float
    floes: Tuple[IceFloe, ...] = ()
    seed: Optional[int] = None

    @property
    def channel_area(self) -> float:
        return self.channel_length * self.channel_width

    @property
    def concentration(self) -> float:
        return float(sum(f.area for f in self.floes)) / self.channel_area

    @property
    def thickness(self) -> float:
        return self.floes[0].thickness if self.floes else IceConfig().thickness

    @property
    def density(self) -> float:
        return self.floes[0].density if self.floes else IceConfig().density

    def with_polygons(self, polygons: List[ConvexPolygon]) -> "IceField":
        """Same floes (ids, thickness, density) at new world placements"""
        floes = tuple(
            IceFloe(id=f.id, polygon=p, thickness=f.thickness, density=f.density)
            for f, p in zip(self.floes, polygons)
        )
        return IceField(self.channel_length, self.channel_width, floes, self.seed)


@dataclass(frozen=True)
class FieldSpec:
    channel_length: float
    channel_width: float
    target_concentration: float
    ice: IceConfig = IceConfig()

    @classmethod
    def from_config(cls, config: ExperimentConfig, concentration: float) -> "FieldSpec":
        return cls(config.channel.length, config.channel.width, concentration, config.ice)


# Floe sizes

def _check_distribution(dist: MassDistribution):
    if dist.b <= 0 or dist.sigma <= 0 or dist.mass_unit_scale <= 0:
        raise ConfigError(f"Mass distribution parameters must be positive: {dist}")


def sample_mass_variates(dist: MassDistribution, rng: np.random.Generator, count: int) -> np.ndarray:
    """Pre-truncation variates Y = a + b·X with X ~ LogNormal(0, σ)"""
    return dist.a + dist.b * rng.lognormal(mean=0.0, sigma=dist.sigma, size=count)


def mass_variate_cdf(y: np.ndarray, dist: MassDistribution) -> np.ndarray:
    """Analytic CDF of the shifted log-normal variate"""
    return stats.lognorm.cdf((np.asarray(y) - dist.a) / dist.b, s=dist.sigma)


def variates_to_areas(y: np.ndarray, dist: MassDistribution, thickness: float, density: float) -> np.ndarray:
    mass = dist.mass_unit_scale * np.exp(np.minimum(y, 700.0))
    return mass / (density * thickness)


def _draw_areas(rng: np.random.Generator, ice: IceConfig, count: int) -> np.ndarray:
    accepted: List[np.ndarray] = []
    have = 0
    lo, hi = ice.min_width ** 2, ice.max_width ** 2
    while have < count:
        y = sample_mass_variates(ice.distribution, rng, max(2 * (count - have), 16))
        areas = variates_to_areas(y, ice.distribution, ice.thickness, ice.density)
        areas = areas[(areas >= lo) & (areas <= hi)]
        accepted.append(areas)
        have += len(areas)
    return np.concatenate(accepted)[:count]


def sample_floe_sizes(dist: MassDistribution, rng_seed: int, count: int,
                      thickness: float = 1.2, density: float = 900.0,
                      min_width: float = 4.0, max_width: float = 100.0) -> np.ndarray:
    """Floe areas (m²) with effective width inside [min_width, max_width]"""
    _check_distribution(dist)
    if count < 1:
        raise ConfigError(f"count must be at least 1, got {count}")
    if thickness <= 0 or density <= 0 or not 0 < min_width < max_width:
        raise ConfigError("thickness, density and the width window must be positive and ordered")
    ice = IceConfig(distribution=dist, thickness=thickness, density=density,
                    min_width=min_width, max_width=max_width)
    return _draw_areas(np.random.default_rng(rng_seed), ice, count)


# Floe shapes

def _chain_steps(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = np.sort(values)
    inner = v[1:-1]
    upper_mask = rng.random(len(inner)) < 0.5
    upper = np.concatenate([[v[0]], inner[upper_mask], [v[-1]]])
    lower = np.concatenate([[v[0]], inner[~upper_mask], [v[-1]]])
    return np.concatenate([np.diff(upper), -np.diff(lower)])


def valtr_polygon(n_sides: int, rng: np.random.Generator) -> np.ndarray:
    """Random convex polygon vertices (Valtr construction) in the unit square"""
    dx = _chain_steps(rng.random(n_sides), rng)
    dy = rng.permutation(_chain_steps(rng.random(n_sides), rng))
    steps = np.column_stack([dx, dy])
    steps = steps[np.argsort(np.arctan2(steps[:, 1], steps[:, 0]), kind="stable")]
    return np.cumsum(steps, axis=0)


def _floe_shape(area: float, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """Vertices centred on their bounding circle, scaled to the area, and that circle's radius"""
    n_sides = int(rng.integers(MIN_SIDES, MAX_SIDES + 1))
    best: Optional[Tuple[float, np.ndarray, float]] = None
    for _ in range(SHAPE_DRAWS):
        try:
            poly = ConvexPolygon(valtr_polygon(n_sides, rng))
        except DegenerateInput:
            continue
        if len(poly) < MIN_SIDES:
            continue
        props = polygon_properties(poly)
        verts = props.centroid.as_array() + (poly.vertices - props.centroid.as_array()) * math.sqrt(area / props.area)
        circle = shapely.minimum_bounding_circle(shapely.multipoints(verts))
        center = np.asarray(shapely.get_coordinates(shapely.centroid(circle))[0])
        local = verts - center
        radius = float(np.max(np.linalg.norm(local, axis=1)))
        fill = area / (math.pi * radius ** 2)
        if best is None or fill > best[0]:
            best = (fill, local, radius)
    if best is None:
        return _floe_shape(area, rng)
    return best[1], best[2]


# Circle packing

def _tangent_points(c1: np.ndarray, r1: np.ndarray, c2: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """Both intersection points of circle pairs (c1, r1) and (c2, r2), vectorised"""
    d_vec = c2 - c1
    d = np.linalg.norm(d_vec, axis=1)
    ok = (d > 1e-12) & (d <= r1 + r2) & (d >= np.abs(r1 - r2))
    if not np.any(ok):
        return np.zeros((0, 2))
    c1, r1, r2, d_vec, d = c1[ok], r1[ok], r2[ok], d_vec[ok], d[ok]
    a = (r1 ** 2 - r2 ** 2 + d ** 2) / (2.0 * d)
    h = np.sqrt(np.maximum(r1 ** 2 - a ** 2, 0.0))
    u = d_vec / d[:, None]
    base = c1 + a[:, None] * u
    perp = np.column_stack([-u[:, 1], u[:, 0]])
    return np.vstack([base + h[:, None] * perp, base - h[:, None] * perp])


def _wall_tangent_points(c: np.ndarray, R: np.ndarray, r: float, y_line: float) -> np.ndarray:
    """Centres at y = y_line at distance R + r from each circle"""
    dy = y_line - c[:, 1]
    dx2 = (R + r) ** 2 - dy ** 2
    ok = dx2 >= 0
    if not np.any(ok):
        return np.zeros((0, 2))
    dx = np.sqrt(dx2[ok])
    xs = np.concatenate([c[ok, 0] + dx, c[ok, 0] - dx])
    return np.column_stack([xs, np.full(len(xs), y_line)])


class CirclePacker:
    """Greedy bottom-left tangent placement of circles in a rectangle"""

    def __init__(self, length: float, width: float):
        self.length = length
        self.width = width
        self.centers = np.zeros((0, 2))
        self.radii = np.zeros(0)
        self._last_x = 0.0

    def place(self, r: float) -> Optional[np.ndarray]:
        if 2.0 * r > self.width or 2.0 * r > self.length:
            return None
        r_max = float(self.radii.max()) if len(self.radii) else r
        band_lo = self._last_x - 2.0 * (r_max + r)
        active = np.nonzero(self.centers[:, 0] >= band_lo)[0] if len(self.radii) else np.zeros(0, dtype=int)
        candidates = [np.array([[r, r], [r, self.width - r]])]
        if len(active):
            c, R = self.centers[active], self.radii[active]
            candidates.append(_wall_tangent_points(c, R, r, r))
            candidates.append(_wall_tangent_points(c, R, r, self.width - r))
            left = _wall_tangent_points(c[:, ::-1], R, r, r)
            candidates.append(left[:, ::-1])
            if len(active) > 1:
                tree = cKDTree(c)
                pairs = tree.query_pairs(2.0 * (r_max + r), output_type="ndarray")
                if len(pairs):
                    i, j = pairs[:, 0], pairs[:, 1]
                    candidates.append(_tangent_points(c[i], R[i] + r, c[j], R[j] + r))
        cand = np.vstack(candidates)

        inside = (
            (cand[:, 0] >= r - _TANGENT_TOL) & (cand[:, 0] <= self.length - r + _TANGENT_TOL)
            & (cand[:, 1] >= r - _TANGENT_TOL) & (cand[:, 1] <= self.width - r + _TANGENT_TOL)
        )
        cand = cand[inside]
        if len(cand) and len(self.radii):
            near = np.nonzero(self.centers[:, 0] >= band_lo - 2.0 * (r_max + r))[0]
            if len(near):
                dist = np.linalg.norm(cand[:, None, :] - self.centers[near][None, :, :], axis=2)
                clear = np.all(dist >= self.radii[near][None, :] + r - _TANGENT_TOL, axis=1)
                cand = cand[clear]
        if len(cand) == 0:
            return None
        order = np.lexsort((cand[:, 1], np.round(cand[:, 0], 9)))
        best = cand[order[0]]
        best = np.clip(best, [r, r], [self.length - r, self.width - r])
        self.centers = np.vstack([self.centers, best])
        self.radii = np.append(self.radii, r)
        self._last_x = float(best[0])
        return best


def _pack_field(spec: FieldSpec, rng: np.random.Generator) -> List[Tuple[np.ndarray, np.ndarray, float]]:
    packer = CirclePacker(spec.channel_length, spec.channel_width)
    placed: List[Tuple[np.ndarray, np.ndarray, float]] = []
    misses = 0
    while misses < MAX_CONSECUTIVE_MISSES:
        area = float(_draw_areas(rng, spec.ice, 1)[0])
        local, radius = _floe_shape(area, rng)
        center = packer.place(radius)
        if center is None:
            misses += 1
            continue
        misses = 0
        placed.append((center, local, radius))
    return placed


def generate_field(spec: FieldSpec, rng_seed: int) -> IceField:
    """Random non-overlapping convex floes at the target concentration (±1% absolute)"""
    target = spec.target_concentration
    if not 0.0 <= target <= 0.6:
        raise ConfigError(f"target_concentration must be in [0, 0.6], got {target}")
    _check_distribution(spec.ice.distribution)
    if target == 0.0:
        return IceField(spec.channel_length, spec.channel_width, (), rng_seed)

    rng = np.random.default_rng(rng_seed)
    channel_area = spec.channel_length * spec.channel_width
    for attempt in range(1, MAX_PACKING_ATTEMPTS + 1):
        placed = _pack_field(spec, rng)
        areas = np.array([
            polygon_properties(ConvexPolygon(local)).area for _, local, _ in placed
        ])
        coverage = float(areas.sum()) / channel_area
        logger.debug(f"Packing attempt {attempt}: {len(placed)} circles, coverage {coverage:.3f}")
        if coverage < target - CONCENTRATION_TOL:
            continue

        keep = np.ones(len(placed), dtype=bool)
        total = float(areas.sum())
        for idx in rng.permutation(len(placed)):
            if total / channel_area <= target + CONCENTRATION_TOL:
                break
            if (total - areas[idx]) / channel_area >= target - CONCENTRATION_TOL:
                keep[idx] = False
                total -= areas[idx]
        if abs(total / channel_area - target) > 0.01:
            continue

        floes = []
        for (center, local, radius) in (p for p, k in zip(placed, keep) if k):
            floes.append(IceFloe(
                id=len(floes),
                polygon=ConvexPolygon(local + center),
                thickness=spec.ice.thickness,
                density=spec.ice.density,
                circle_center=Point2(float(center[0]), float(center[1])),
                circle_radius=radius,
            ))
        field_ = IceField(spec.channel_length, spec.channel_width, tuple(floes), rng_seed)
        logger.info(f"Generated ice field seed={rng_seed}: {len(floes)} floes, "
                    f"concentration {field_.concentration:.3f} (target {target:.2f})")
        return field_

    raise PackingFailure(
        f"Could not reach concentration {target:.2f} after {MAX_PACKING_ATTEMPTS} packing attempts"
    )


def occupancy_image(field_: IceField, grid: GridSpec) -> np.ndarray:
    """Boolean image, True where a cell overlaps any floe"""
    image = np.zeros(grid.shape, dtype=bool)
    for floe in field_.floes:
        cells = rasterize_polygon(floe.polygon, grid)
        image[cells[:, 0], cells[:, 1]] = True
    return image


def field_statistics(field_: IceField) -> Dict[str, float]:
    widths = np.array([f.effective_width for f in field_.floes])
    areas = widths ** 2
    return {
        "count": len(field_.floes),
        "mean_effective_width": float(widths.mean()) if len(widths) else 0.0,
        "sd_effective_width": float(widths.std()) if len(widths) else 0.0,
        "mean_area": float(areas.mean()) if len(areas) else 0.0,
        "concentration": field_.concentration,
    }


# Interchange format

def field_to_file(field_: IceField) -> IceFieldFile:
    circles = None
    if field_.floes and all(f.circle_center is not None for f in field_.floes):
        circles = [(f.circle_center.x, f.circle_center.y, f.circle_radius) for f in field_.floes]
    return IceFieldFile(
        channel=(field_.channel_length, field_.channel_width),
        thickness=field_.thickness,
        density=field_.density,
        concentration=field_.concentration,
        seed=field_.seed,
        floes=[[tuple(map(float, v)) for v in f.polygon.vertices] for f in field_.floes],
        circles=circles,
    )


def save_field(field_: IceField, path: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(field_to_file(field_).model_dump_json(indent=1))


def load_field(path: str) -> IceField:
    try:
        data = IceFieldFile.model_validate(json.loads(Path(path).read_text()))
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        logger.error(f"Failed to load ice field {path}: {e}")
        raise ConfigError(f"Invalid ice field file {path}: {e}") from e
    floes = []
    for i, verts in enumerate(data.floes):
        circle = data.circles[i] if data.circles else None
        floes.append(IceFloe(
            id=i,
            polygon=ConvexPolygon(np.asarray(verts)),
            thickness=data.thickness,
            density=data.density,
            circle_center=Point2(circle[0], circle[1]) if circle else None,
            circle_radius=circle[2] if circle else None,
        ))
    return IceField(data.channel[0], data.channel[1], tuple(floes), data.seed)
