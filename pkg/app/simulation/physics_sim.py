"""
2D impulse-based rigid-body world: dynamic convex floes, a kinematic ship and
static channel walls.

Each substep interpolates the ship pose, detects contacts (bounding-circle
broadphase, separating-axis narrowphase with a single deepest point),
resolves them with sequential impulses, logs ship collisions, pushes
overlapping bodies apart, integrates and applies water drag.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..core.errors import ConfigError
from ..core.event_emitter import CollisionEventEmitter
from ..core.geometry import (ConvexPolygon, Pose, ShipFootprint, polygon_inertia, polygon_properties,
                             rotation_matrix, wrap_to_pi)
from ..models.schemas import PhysicsConfig
from .icefield import IceField, IceFloe

logger = logging.getLogger(__name__)

REFERENCE_SUBSTEP = 0.005
TIE_TOL = 1e-6

SHIP = "ship"
FLOE = "floe"
WALL = "wall"


def _cross(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _perp(v: np.ndarray) -> np.ndarray:
    return np.array([-v[1], v[0]])


@dataclass(eq=False)
class FloeBody:
    """Dynamic floe; position is the centroid, local vertices are centroid-relative at angle 0"""

    id: int
    local_vertices: np.ndarray
    position: np.ndarray
    mass: float
    inertia: float
    angle: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0
    moved: bool = False
    radius: float = field(init=False)
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.mass <= 0 or self.inertia <= 0:
            raise ConfigError(f"Floe {self.id} needs positive mass and inertia")
        self.position = np.asarray(self.position, dtype=float).copy()
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        self.radius = float(np.max(np.linalg.norm(self.local_vertices, axis=1)))
        self.update_vertices()

    @classmethod
    def from_polygon(cls, floe_id: int, polygon: ConvexPolygon, mass: float) -> "FloeBody":
        centroid = polygon_properties(polygon).centroid.as_array()
        return cls(id=floe_id, local_vertices=polygon.vertices - centroid, position=centroid,
                   mass=mass, inertia=polygon_inertia(polygon, mass))

    @property
    def inv_mass(self) -> float:
        return 1.0 / self.mass

    @property
    def inv_inertia(self) -> float:
        return 1.0 / self.inertia

    def update_vertices(self):
        self.vertices = self.local_vertices @ rotation_matrix(self.angle).T + self.position

    def polygon(self) -> ConvexPolygon:
        return ConvexPolygon(self.vertices)

    def kinetic_energy(self) -> float:
        return 0.5 * self.mass * float(self.velocity @ self.velocity) + 0.5 * self.inertia * self.omega ** 2


@dataclass(eq=False)
class ShipBody:
    """Kinematic ship: pose and world-frame velocity are prescribed, inverse mass is zero"""

    footprint: ShipFootprint
    mass: float
    pose: Pose
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    omega: float = 0.0
    inv_mass: float = 0.0
    inv_inertia: float = 0.0
    radius: float = field(init=False)
    vertices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.velocity = np.asarray(self.velocity, dtype=float).copy()
        self.radius = float(np.max(np.linalg.norm(self.footprint.outline.vertices, axis=1)))
        self.set_pose(self.pose)

    @property
    def position(self) -> np.ndarray:
        return np.array([self.pose.x, self.pose.y])

    def set_pose(self, pose: Pose):
        self.pose = pose
        self.vertices = self.footprint.world_vertices(pose)

    def to_body(self, vector: np.ndarray) -> np.ndarray:
        return rotation_matrix(self.pose.psi).T @ vector


@dataclass(eq=False)
class WallBody:
    """Static half-plane boundary y = level; normal points into the channel"""

    level: float
    normal: np.ndarray
    inv_mass: float = 0.0
    inv_inertia: float = 0.0
    omega: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def position(self) -> np.ndarray:
        return np.array([0.0, self.level])


@dataclass(eq=False)
class Contact:
    """Single-point manifold; the normal points from body a to body b"""

    kind: str
    a: object
    b: object
    point: np.ndarray
    normal: np.ndarray
    depth: float
    friction: float = 0.0
    normal_impulse: float = 0.0
    tangent_impulse: float = 0.0
    approach_speed: float = 0.0
    _ra: np.ndarray = field(default=None, repr=False)
    _rb: np.ndarray = field(default=None, repr=False)
    _normal_mass: float = field(default=0.0, repr=False)
    _tangent_mass: float = field(default=0.0, repr=False)
    _target: float = field(default=0.0, repr=False)
    _pos_a: np.ndarray = field(default=None, repr=False)
    _pos_b: np.ndarray = field(default=None, repr=False)

    @property
    def tangent(self) -> np.ndarray:
        return _perp(self.normal)

    @property
    def impulse(self) -> np.ndarray:
        """Total impulse applied to body b"""
        return self.normal_impulse * self.normal + self.tangent_impulse * self.tangent


@dataclass(frozen=True)
class CollisionEvent:
    """Ship–floe impulse over one substep. Point, normal and force are in the ship body frame."""

    time: float
    floe_id: int
    impulse: float
    impact_force: float
    point: Tuple[float, float]
    normal: Tuple[float, float]
    floe_mass: float
    pre_velocity: Tuple[float, float, float]
    post_velocity: Tuple[float, float, float]
    delta_k_sys: float
    delta_k_ice: float
    force: Tuple[float, float, float]

    @property
    def delta_k_ship(self) -> float:
        return self.delta_k_sys - self.delta_k_ice

    def to_dict(self) -> Dict:
        return {
            "t": self.time,
            "floe_id": self.floe_id,
            "impulse": self.impulse,
            "impact_force": self.impact_force,
            "point": list(self.point),
            "normal": list(self.normal),
            "floe_mass": self.floe_mass,
            "pre_velocity": list(self.pre_velocity),
            "post_velocity": list(self.post_velocity),
            "delta_k_sys": self.delta_k_sys,
            "delta_k_ice": self.delta_k_ice,
            "delta_k_ship": self.delta_k_ship,
            "force": list(self.force),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "CollisionEvent":
        return cls(
            time=data["t"], floe_id=data["floe_id"], impulse=data["impulse"],
            impact_force=data["impact_force"], point=tuple(data["point"]), normal=tuple(data["normal"]),
            floe_mass=data["floe_mass"], pre_velocity=tuple(data["pre_velocity"]),
            post_velocity=tuple(data["post_velocity"]), delta_k_sys=data["delta_k_sys"],
            delta_k_ice=data["delta_k_ice"], force=tuple(data["force"]),
        )


@dataclass(eq=False)
class SimWorld:
    channel_length: float
    channel_width: float
    ship: ShipBody
    floes: List[FloeBody]
    params: PhysicsConfig = field(default_factory=PhysicsConfig)
    thickness: float = 1.2
    ice_density: float = 900.0
    time: float = 0.0
    emitter: CollisionEventEmitter = field(default_factory=CollisionEventEmitter, repr=False)
    tracks: Dict[int, List[Tuple[float, float, float, float, float]]] = field(default_factory=dict, repr=False)
    pushed: Set[int] = field(default_factory=set)
    collided: Set[int] = field(default_factory=set)
    substeps: int = 0
    walls: Tuple[WallBody, WallBody] = field(init=False, repr=False)

    def __post_init__(self):
        self.walls = (WallBody(0.0, np.array([0.0, 1.0])),
                      WallBody(self.channel_width, np.array([0.0, -1.0])))

    @property
    def floe_masses(self) -> Dict[int, float]:
        return {f.id: f.mass for f in self.floes}

    def to_field(self, seed: Optional[int] = None) -> IceField:
        """Current floe placements as an ice field"""
        floes = tuple(IceFloe(id=f.id, polygon=f.polygon(), thickness=self.thickness, density=self.ice_density)
                      for f in self.floes)
        return IceField(self.channel_length, self.channel_width, floes, seed)

    def floe_kinetic_energy(self) -> float:
        return float(sum(f.kinetic_energy() for f in self.floes))


def create_world(field_: IceField, ship_pose: Pose, footprint: ShipFootprint, ship_mass: float,
                 params: Optional[PhysicsConfig] = None,
                 ship_velocity: Optional[np.ndarray] = None) -> SimWorld:
    """World at rest with the field's floes, the ship at ship_pose moving at world velocity (ẋ, ẏ, ψ̇)"""
    if ship_mass <= 0:
        raise ConfigError(f"Ship mass must be positive, got {ship_mass}")
    params = params or PhysicsConfig()
    floes = [FloeBody.from_polygon(f.id, f.polygon, f.mass) for f in field_.floes]
    vel = np.zeros(3) if ship_velocity is None else np.asarray(ship_velocity, dtype=float)
    ship = ShipBody(footprint=footprint, mass=ship_mass, pose=ship_pose, velocity=vel[:2], omega=float(vel[2]))
    world = SimWorld(field_.channel_length, field_.channel_width, ship, floes, params,
                     thickness=field_.thickness, ice_density=field_.density)
    logger.debug(f"Created world with {len(floes)} floes in a {field_.channel_length:g}×{field_.channel_width:g} m channel")
    return world


# Narrowphase

def _edge_normals(vertices: np.ndarray) -> np.ndarray:
    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    return normals / np.linalg.norm(normals, axis=1)[:, None]


def _face_separations(ref: np.ndarray, inc: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per reference face: the signed distance of every incident vertex (inc × faces) and its minimum"""
    normals = _edge_normals(ref)
    offsets = np.sum(ref * normals, axis=1)
    dist = inc @ normals.T - offsets[None, :]
    return normals, dist


def polygon_contact(verts_a: np.ndarray, verts_b: np.ndarray) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    """
    Separating-axis test between two convex CCW polygons.

    Returns (normal a→b, point, depth) for overlapping polygons, None otherwise.
    The point is the deepest incident vertex, averaged over ties.
    """
    normals_a, dist_a = _face_separations(verts_a, verts_b)
    sep_a = dist_a.min(axis=0)
    ia = int(np.argmax(sep_a))
    if sep_a[ia] > 0.0:
        return None
    normals_b, dist_b = _face_separations(verts_b, verts_a)
    sep_b = dist_b.min(axis=0)
    ib = int(np.argmax(sep_b))
    if sep_b[ib] > 0.0:
        return None

    if sep_a[ia] >= sep_b[ib] - TIE_TOL:
        column, incident, normal, depth = dist_a[:, ia], verts_b, normals_a[ia], -float(sep_a[ia])
    else:
        column, incident, normal, depth = dist_b[:, ib], verts_a, -normals_b[ib], -float(sep_b[ib])
    deepest = column <= column.min() + TIE_TOL
    return normal.copy(), incident[deepest].mean(axis=0), depth


def _wall_contact(wall: WallBody, floe: FloeBody) -> Optional[Tuple[np.ndarray, np.ndarray, float]]:
    dist = (floe.vertices[:, 1] - wall.level) * wall.normal[1]
    depth = -float(dist.min())
    if depth <= 0.0:
        return None
    deepest = dist <= dist.min() + TIE_TOL
    return wall.normal.copy(), floe.vertices[deepest].mean(axis=0), depth


# Broadphase + narrowphase

def _floe_pairs(world: SimWorld) -> np.ndarray:
    if len(world.floes) < 2:
        return np.zeros((0, 2), dtype=np.int64)
    centers = np.array([f.position for f in world.floes])
    radii = np.array([f.radius for f in world.floes])
    tree = cKDTree(centers)
    pairs = tree.query_pairs(2.0 * float(radii.max()), output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    pairs = np.sort(pairs, axis=1)
    pairs = pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]
    gap = np.linalg.norm(centers[pairs[:, 0]] - centers[pairs[:, 1]], axis=1)
    pairs = pairs[gap <= radii[pairs[:, 0]] + radii[pairs[:, 1]]]
    moved = np.array([f.moved for f in world.floes])
    return pairs[moved[pairs[:, 0]] | moved[pairs[:, 1]]]


def detect_contacts(world: SimWorld) -> List[Contact]:
    """
    Ship–floe, floe–floe and floe–wall contacts in a deterministic order.

    Floe–floe pairs where neither floe has ever moved are skipped.
    """
    params = world.params
    contacts: List[Contact] = []
    ship = world.ship
    if world.floes:
        centers = np.array([f.position for f in world.floes])
        radii = np.array([f.radius for f in world.floes])
        near = np.nonzero(np.linalg.norm(centers - ship.position, axis=1) <= ship.radius + radii)[0]
    else:
        near = []
    for i in near:
        floe = world.floes[int(i)]
        hit = polygon_contact(ship.vertices, floe.vertices)
        if hit is not None:
            normal, point, depth = hit
            contacts.append(Contact(SHIP, ship, floe, point, normal, depth, params.friction_ship_ice))

    for i, j in _floe_pairs(world):
        a, b = world.floes[int(i)], world.floes[int(j)]
        hit = polygon_contact(a.vertices, b.vertices)
        if hit is not None:
            normal, point, depth = hit
            contacts.append(Contact(FLOE, a, b, point, normal, depth, params.friction_ice_ice))

    for floe in world.floes:
        if not floe.moved:
            continue
        y = floe.position[1]
        for wall in world.walls:
            if abs(y - wall.level) > floe.radius:
                continue
            hit = _wall_contact(wall, floe)
            if hit is not None:
                normal, point, depth = hit
                contacts.append(Contact(WALL, wall, floe, point, normal, depth, params.friction_ice_ice))
    return contacts


# Solver

def _point_velocity(body, r: np.ndarray) -> np.ndarray:
    return body.velocity + body.omega * _perp(r)


def _relative_velocity(c: Contact) -> np.ndarray:
    return _point_velocity(c.b, c._rb) - _point_velocity(c.a, c._ra)


def _apply(body, r: np.ndarray, impulse: np.ndarray):
    if body.inv_mass == 0.0 and body.inv_inertia == 0.0:
        return
    body.velocity = body.velocity + body.inv_mass * impulse
    body.omega = body.omega + body.inv_inertia * _cross(r, impulse)


def _effective_mass(c: Contact, direction: np.ndarray) -> float:
    ra_n = _cross(c._ra, direction)
    rb_n = _cross(c._rb, direction)
    k = c.a.inv_mass + c.b.inv_mass + c.a.inv_inertia * ra_n ** 2 + c.b.inv_inertia * rb_n ** 2
    return 1.0 / k if k > 0.0 else 0.0


def _prepare(c: Contact, restitution: float):
    c._ra = c.point - c.a.position
    c._rb = c.point - c.b.position
    c._normal_mass = _effective_mass(c, c.normal)
    c._tangent_mass = _effective_mass(c, c.tangent)
    vn = float(_relative_velocity(c) @ c.normal)
    c.approach_speed = max(-vn, 0.0)
    c._target = restitution * c.approach_speed
    c._pos_a = np.array(c.a.position, dtype=float)
    c._pos_b = np.array(c.b.position, dtype=float)


def resolve_impulse(contacts: List[Contact], restitution: float, iterations: int = 4) -> List[np.ndarray]:
    """
    Sequential impulses with accumulated clamping.

    The normal impulse drives the relative normal velocity to −e times the
    approach velocity and never pulls; friction is clamped to μ times the
    normal impulse. Returns the total impulse applied to each contact's body b.
    """
    for c in contacts:
        _prepare(c, restitution)
    for _ in range(iterations):
        for c in contacts:
            if c._normal_mass == 0.0:
                continue
            vn = float(_relative_velocity(c) @ c.normal)
            delta = c._normal_mass * (c._target - vn)
            accumulated = max(c.normal_impulse + delta, 0.0)
            delta = accumulated - c.normal_impulse
            c.normal_impulse = accumulated
            if delta != 0.0:
                p = delta * c.normal
                _apply(c.a, c._ra, -p)
                _apply(c.b, c._rb, p)

            tangent = c.tangent
            vt = float(_relative_velocity(c) @ tangent)
            limit = c.friction * c.normal_impulse
            accumulated = min(max(c.tangent_impulse - c._tangent_mass * vt, -limit), limit)
            delta = accumulated - c.tangent_impulse
            c.tangent_impulse = accumulated
            if delta != 0.0:
                p = delta * tangent
                _apply(c.a, c._ra, -p)
                _apply(c.b, c._rb, p)
    return [c.impulse for c in contacts]


def correct_positions(contacts: List[Contact], baumgarte: float, slop: float, iterations: int = 2):
    """Linear projection of the remaining penetration beyond slop, shared by inverse mass"""
    for _ in range(iterations):
        for c in contacts:
            inv = c.a.inv_mass + c.b.inv_mass
            if inv == 0.0:
                continue
            moved = (np.asarray(c.b.position) - c._pos_b) - (np.asarray(c.a.position) - c._pos_a)
            depth = c.depth - float(moved @ c.normal)
            push = baumgarte * max(depth - slop, 0.0) / inv
            if push == 0.0:
                continue
            if c.a.inv_mass > 0.0:
                c.a.position = c.a.position - push * c.a.inv_mass * c.normal
            if c.b.inv_mass > 0.0:
                c.b.position = c.b.position + push * c.b.inv_mass * c.normal


# Drag

def projected_width(floe: FloeBody, direction: np.ndarray) -> float:
    """Extent of the floe perpendicular to direction"""
    n = np.linalg.norm(direction)
    if n == 0.0:
        return 0.0
    across = _perp(np.asarray(direction) / n)
    proj = floe.vertices @ across
    return float(proj.max() - proj.min())


def drag_rate(floe: FloeBody, water_density: float, drag_coefficient: float, ice_density: float,
              thickness: float) -> float:
    """k in dv/dt = −k·‖v‖·v, with the submerged area projected across the current velocity"""
    area = (ice_density / water_density) * thickness * projected_width(floe, floe.velocity)
    return 0.5 * water_density * drag_coefficient * area / floe.mass


def apply_drag(floe: FloeBody, dt: float, water_density: float, drag_coefficient: float, ice_density: float,
               thickness: float, angular_decay: float) -> Tuple[np.ndarray, float]:
    """
    Quadratic drag integrated exactly along the current direction of motion,
    v ← v / (1 + k·‖v‖·Δt), and multiplicative angular decay per reference substep.
    """
    speed = float(np.linalg.norm(floe.velocity))
    if speed > 0.0:
        k = drag_rate(floe, water_density, drag_coefficient, ice_density, thickness)
        floe.velocity = floe.velocity / (1.0 + k * speed * dt)
    if floe.omega != 0.0:
        floe.omega *= max(0.0, 1.0 - angular_decay * dt / REFERENCE_SUBSTEP)
    return floe.velocity, floe.omega


# Stepping

def _substep_count(dt_ctrl: float, dt_sim: float) -> int:
    ratio = dt_ctrl / dt_sim
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"Control step {dt_ctrl} is not a multiple of the simulation step {dt_sim}")
    return n


def _world_velocity(pose: Pose, nu: np.ndarray) -> np.ndarray:
    c, s = math.cos(pose.psi), math.sin(pose.psi)
    return np.array([c * nu[0] - s * nu[1], s * nu[0] + c * nu[1], nu[2]])


def _velocity_triple(floe: FloeBody) -> Tuple[float, float, float]:
    return float(floe.velocity[0]), float(floe.velocity[1]), float(floe.omega)


def _ship_event(world: SimWorld, c: Contact, pre: Tuple[float, float, float], dt_sim: float) -> CollisionEvent:
    ship, floe = world.ship, c.b
    impulse = c.impulse
    force_world = -impulse / dt_sim
    force_body = ship.to_body(force_world)
    arm = ship.to_body(c.point - ship.position)
    torque = _cross(arm, force_body)
    post = _velocity_triple(floe)
    m_eq = ship.mass * floe.mass / (ship.mass + floe.mass)
    delta_k_sys = -0.5 * m_eq * c.approach_speed ** 2
    delta_k_ice = (0.5 * floe.mass * (post[0] ** 2 + post[1] ** 2 - pre[0] ** 2 - pre[1] ** 2)
                   + 0.5 * floe.inertia * (post[2] ** 2 - pre[2] ** 2))
    normal = ship.to_body(c.normal)
    magnitude = float(np.linalg.norm(impulse))
    return CollisionEvent(
        time=world.time,
        floe_id=floe.id,
        impulse=magnitude,
        impact_force=magnitude / dt_sim,
        point=(float(arm[0]), float(arm[1])),
        normal=(float(normal[0]), float(normal[1])),
        floe_mass=floe.mass,
        pre_velocity=pre,
        post_velocity=post,
        delta_k_sys=delta_k_sys,
        delta_k_ice=delta_k_ice,
        force=(float(force_body[0]), float(force_body[1]), torque),
    )


def _update_pushed(world: SimWorld, contacts: List[Contact]):
    """Floes connected to the ship through contacts carrying impulse this substep"""
    index = {id(f): i for i, f in enumerate(world.floes)}
    ship_node = len(world.floes)
    rows, cols = [], []
    for c in contacts:
        if c.normal_impulse <= 0.0 or c.kind == WALL:
            continue
        a = ship_node if c.kind == SHIP else index[id(c.a)]
        b = index[id(c.b)]
        rows.append(a)
        cols.append(b)
        if c.kind == SHIP:
            world.collided.add(c.b.id)
    if not rows:
        return
    n = ship_node + 1
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    members = np.nonzero(labels[:-1] == labels[ship_node])[0]
    world.pushed.update(world.floes[int(i)].id for i in members)


def _sample_tracks(world: SimWorld, every: int):
    if world.substeps % every != 0:
        return
    for f in world.floes:
        if f.moved:
            world.tracks.setdefault(f.id, []).append(
                (world.time, float(f.position[0]), float(f.position[1]),
                 float(f.velocity[0]), float(f.velocity[1])))


def _substep(world: SimWorld, pose: Pose, velocity: np.ndarray, dt: float) -> List[CollisionEvent]:
    params = world.params
    ship = world.ship
    ship.set_pose(pose)
    ship.velocity = velocity[:2].copy()
    ship.omega = float(velocity[2])
    t_start = world.time
    world.time = t_start + dt
    world.substeps += 1

    contacts = detect_contacts(world)
    pre = {id(c.b): _velocity_triple(c.b) for c in contacts if c.kind == SHIP}
    rest = {id(f): f.position.copy() for c in contacts for f in (c.a, c.b)
            if isinstance(f, FloeBody) and not f.moved}
    resolve_impulse(contacts, params.restitution, params.velocity_iterations)

    events = []
    for c in contacts:
        if c.kind == SHIP and c.normal_impulse > 0.0:
            events.append(_ship_event(world, c, pre[id(c.b)], dt))
    _update_pushed(world, contacts)

    correct_positions(contacts, params.baumgarte, params.penetration_slop, params.position_iterations)

    for f in world.floes:
        if not f.moved:
            still = f.velocity[0] == 0.0 and f.velocity[1] == 0.0 and f.omega == 0.0
            if still and (id(f) not in rest or np.array_equal(f.position, rest[id(f)])):
                continue
            f.moved = True
            start = rest.get(id(f), f.position)
            world.tracks.setdefault(f.id, []).append((t_start, float(start[0]), float(start[1]), 0.0, 0.0))
        f.position = f.position + f.velocity * dt
        f.angle += f.omega * dt
        f.update_vertices()
        apply_drag(f, dt, params.water_density, params.drag_coefficient, world.ice_density,
                   world.thickness, params.angular_decay)
    return events


def step_world(world: SimWorld, ship_pose: Pose, ship_velocity: np.ndarray,
               dt_ctrl: float) -> Tuple[np.ndarray, List[CollisionEvent]]:
    """
    Advance the world by dt_ctrl while the ship moves from its current pose to
    ship_pose; ship_velocity is the body-frame ν at the end of the interval.
    Pose and velocity are interpolated linearly across the substeps.

    Returns τ_env = (X, Y, N) in the ship body frame, the mean over substeps
    of the summed contact forces (impulse/Δt_sim), and the collision events.
    """
    params = world.params
    dt = params.dt_sim
    n_sub = _substep_count(dt_ctrl, dt)
    every = max(1, int(round(params.track_interval / dt)))

    p0 = world.ship.pose
    v0 = np.array([world.ship.velocity[0], world.ship.velocity[1], world.ship.omega])
    v1 = _world_velocity(ship_pose, np.asarray(ship_velocity, dtype=float))
    dpsi = wrap_to_pi(ship_pose.psi - p0.psi)

    events: List[CollisionEvent] = []
    for k in range(1, n_sub + 1):
        f = k / n_sub
        pose = Pose(p0.x + f * (ship_pose.x - p0.x), p0.y + f * (ship_pose.y - p0.y), p0.psi + f * dpsi)
        step_events = _substep(world, pose, v0 + f * (v1 - v0), dt)
        for event in step_events:
            world.emitter.emit_collision(event)
        events.extend(step_events)
        _sample_tracks(world, every)

    tau_env = np.zeros(3)
    for event in events:
        tau_env += np.asarray(event.force)
    tau_env /= n_sub
    return tau_env, events
