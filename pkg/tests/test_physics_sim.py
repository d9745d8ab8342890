#!/usr/bin/env python3
"""
Tests for the rigid-body ice world: contacts, impulses, drag and control-interval stepping
"""

import math

import numpy as np
import pytest
from shapely.geometry import Polygon

from app.core.errors import ConfigError
from app.core.geometry import ConvexPolygon, Pose, ShipFootprint, transform_points
from app.models.schemas import PhysicsConfig
from app.planners.costmap import ke_loss
from app.simulation.physics_sim import (FLOE, SHIP, Contact, FloeBody, apply_drag, create_world, detect_contacts,
                                        drag_rate, polygon_contact, resolve_impulse, step_world)

from conftest import make_field, square

SHIP_MASS = 6.0e6
DT_CTRL = 0.02


@pytest.fixture
def flat_bow():
    """10 × 4 m box hull, so a head-on strike hits a flat face"""
    outline = ConvexPolygon(np.array([[-5.0, -2.0], [5.0, -2.0], [5.0, 2.0], [-5.0, 2.0]]))
    return ShipFootprint(outline, 10.0, 4.0)


def head_on_world(footprint, gap: float, params=None, extra=()):
    """Ship at (0, 30) moving +x at 2 m/s with a 2 m square floe dead ahead"""
    field_ = make_field([square(5.0 + gap + 1.0, 30.0, 1.0), *extra], length=200.0, width=60.0)
    return create_world(field_, Pose(0.0, 30.0, 0.0), footprint, SHIP_MASS, params,
                        ship_velocity=np.array([2.0, 0.0, 0.0]))


def drive(world, steps: int, speed: float = 2.0):
    """Advance the ship at constant surge speed, collecting (tau_env, events) per control step"""
    out = []
    for _ in range(steps):
        pose = world.ship.pose
        target = Pose(pose.x + speed * DT_CTRL, pose.y, pose.psi)
        out.append(step_world(world, target, np.array([speed, 0.0, 0.0]), DT_CTRL))
    return out


def rotated_square(cx, cy, half, angle):
    base = np.array([[-half, -half], [half, -half], [half, half], [-half, half]])
    return ConvexPolygon(transform_points(base, cx, cy, angle))


class TestNarrowphase:
    """Separating-axis contacts"""

    def test_overlapping_unit_squares(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        b = a + np.array([0.9, 0.0])
        normal, point, depth = polygon_contact(a, b)
        assert abs(normal[0]) == pytest.approx(1.0)
        assert normal[1] == pytest.approx(0.0, abs=1e-12)
        assert depth == pytest.approx(0.1)
        assert 0.9 - 1e-9 <= point[0] <= 1.0 + 1e-9

    def test_normal_points_from_a_to_b(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        normal, _, _ = polygon_contact(a, a + np.array([0.0, 0.95]))
        assert normal[1] > 0.0

    def test_separated(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        assert polygon_contact(a, a + np.array([1.5, 0.2])) is None

    def test_broadphase_rejects_distant_floes(self):
        field_ = make_field([square(50.0, 30.0, 2.0), square(60.0, 30.0, 2.0)])
        world = create_world(field_, Pose(-100.0, 30.0, 0.0), ShipFootprint.default(20.0, 6.0, 4.0), SHIP_MASS)
        for f in world.floes:
            f.moved = True
        assert detect_contacts(world) == []

    def test_matches_all_pairs_intersection(self):
        rng = np.random.default_rng(9)
        polygons = [rotated_square(x, y, 1.0, a) for x, y, a in
                    zip(rng.uniform(40.0, 60.0, 40), rng.uniform(20.0, 40.0, 40), rng.uniform(0.0, math.pi, 40))]
        world = create_world(make_field(polygons), Pose(-100.0, 30.0, 0.0),
                             ShipFootprint.default(20.0, 6.0, 4.0), SHIP_MASS)
        for f in world.floes:
            f.moved = True
        found = {tuple(sorted((c.a.id, c.b.id))) for c in detect_contacts(world) if c.kind == FLOE}
        shapes = [Polygon(p.vertices) for p in polygons]
        expected = {(i, j) for i in range(len(shapes)) for j in range(i + 1, len(shapes))
                    if shapes[i].intersection(shapes[j]).area > 0.0}
        assert found == expected

    def test_resting_floes_skip_narrowphase(self):
        field_ = make_field([square(50.0, 30.0, 2.0), square(53.0, 30.0, 2.0)])
        world = create_world(field_, Pose(-100.0, 30.0, 0.0), ShipFootprint.default(20.0, 6.0, 4.0), SHIP_MASS)
        assert detect_contacts(world) == []
        world.floes[0].moved = True
        assert len(detect_contacts(world)) == 1


class TestResolveImpulse:
    """Sequential impulse solver"""

    def test_head_on_strike_by_kinematic_ship(self, flat_bow):
        world = head_on_world(flat_bow, gap=-0.05)
        contacts = detect_contacts(world)
        assert [c.kind for c in contacts] == [SHIP]
        floe = world.floes[0]
        impulses = resolve_impulse(contacts, 0.1, 4)
        assert floe.velocity == pytest.approx([2.2, 0.0], abs=1e-9)
        assert impulses[0] == pytest.approx([floe.mass * 2.2, 0.0], rel=1e-9, abs=1e-6)
        assert floe.omega == pytest.approx(0.0, abs=1e-12)

    def test_identical_floes_stop(self):
        a = FloeBody.from_polygon(0, square(0.0, 0.0, 1.0), 1000.0)
        b = FloeBody.from_polygon(1, square(1.98, 0.0, 1.0), 1000.0)
        a.velocity, b.velocity = np.array([1.0, 0.0]), np.array([-1.0, 0.0])
        normal, point, depth = polygon_contact(a.vertices, b.vertices)
        resolve_impulse([Contact(FLOE, a, b, point, normal, depth, 0.35)], 0.0, 4)
        assert a.velocity == pytest.approx([0.0, 0.0], abs=1e-12)
        assert b.velocity == pytest.approx([0.0, 0.0], abs=1e-12)

    def test_momentum_conserved(self):
        rng = np.random.default_rng(12)
        checked = 0
        for _ in range(50):
            a = FloeBody.from_polygon(0, rotated_square(0.0, 0.0, 1.0, rng.uniform(0, math.pi)),
                                      rng.uniform(500.0, 5000.0))
            b = FloeBody.from_polygon(1, rotated_square(rng.uniform(1.6, 2.2), rng.uniform(-1.0, 1.0), 1.0,
                                                        rng.uniform(0, math.pi)), rng.uniform(500.0, 5000.0))
            hit = polygon_contact(a.vertices, b.vertices)
            if hit is None:
                continue
            a.velocity, b.velocity = rng.normal(0.0, 1.0, 2), rng.normal(0.0, 1.0, 2)
            a.omega, b.omega = rng.normal(0.0, 0.3), rng.normal(0.0, 0.3)
            before = a.mass * a.velocity + b.mass * b.velocity
            ke_before = a.kinetic_energy() + b.kinetic_energy()
            resolve_impulse([Contact(FLOE, a, b, hit[1], hit[0], hit[2], 0.35)], 0.1, 4)
            after = a.mass * a.velocity + b.mass * b.velocity
            scale = max(1.0, float(np.linalg.norm(before)))
            assert np.linalg.norm(after - before) / scale < 1e-9
            assert a.kinetic_energy() + b.kinetic_energy() <= ke_before * (1.0 + 1e-9) + 1e-9
            checked += 1
        assert checked > 10

    def test_separating_contact_not_pulled(self):
        a = FloeBody.from_polygon(0, square(0.0, 0.0, 1.0), 1000.0)
        b = FloeBody.from_polygon(1, square(1.98, 0.0, 1.0), 1000.0)
        a.velocity, b.velocity = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
        normal, point, depth = polygon_contact(a.vertices, b.vertices)
        contact = Contact(FLOE, a, b, point, normal, depth, 0.35)
        resolve_impulse([contact], 0.1, 4)
        assert contact.normal_impulse == 0.0
        assert b.velocity == pytest.approx([1.0, 0.0])


class TestDrag:
    """Quadratic drag and angular decay"""

    @pytest.fixture
    def floe(self):
        return FloeBody.from_polygon(0, square(0.0, 0.0, 1.0), 4320.0)

    def test_still_floe_unchanged(self, floe):
        velocity, omega = apply_drag(floe, 0.005, 1025.0, 1.0, 900.0, 1.2, 0.03)
        assert np.array_equal(velocity, np.zeros(2))
        assert omega == 0.0

    def test_drag_opposes_motion(self, floe):
        floe.velocity = np.array([0.6, -0.8])
        velocity, _ = apply_drag(floe, 0.005, 1025.0, 1.0, 900.0, 1.2, 0.03)
        assert np.linalg.norm(velocity) < 1.0
        assert velocity / np.linalg.norm(velocity) == pytest.approx([0.6, -0.8])

    def test_matches_closed_form_decay(self, floe):
        floe.velocity = np.array([1.0, 0.0])
        k = drag_rate(floe, 1025.0, 1.0, 900.0, 1.2)
        dt, steps = 0.005, 12000
        speeds = []
        for _ in range(steps):
            apply_drag(floe, dt, 1025.0, 1.0, 900.0, 1.2, 0.03)
            speeds.append(floe.velocity[0])
        assert all(a > b for a, b in zip(speeds, speeds[1:]))
        expected = 1.0 / (1.0 + k * 1.0 * dt * steps)
        assert speeds[-1] == pytest.approx(expected, rel=0.01)

    def test_angular_decay_per_reference_step(self, floe):
        floe.omega = 1.0
        apply_drag(floe, 0.005, 1025.0, 1.0, 900.0, 1.2, 0.03)
        assert floe.omega == pytest.approx(0.97)


class TestStepWorld:
    """Control-interval stepping"""

    def test_open_water(self, flat_bow):
        world = create_world(make_field([]), Pose(0.0, 30.0, 0.0), flat_bow, SHIP_MASS,
                             ship_velocity=np.array([2.0, 0.0, 0.0]))
        for tau_env, events in drive(world, 10):
            assert np.array_equal(tau_env, np.zeros(3))
            assert events == []
        assert world.ship.pose.x == pytest.approx(0.4)

    def test_control_step_must_be_multiple(self, flat_bow):
        world = head_on_world(flat_bow, gap=1.0)
        with pytest.raises(ConfigError):
            step_world(world, Pose(0.1, 30.0, 0.0), np.array([2.0, 0.0, 0.0]), 0.0123)

    def test_head_on_strike_opposes_motion(self, flat_bow):
        world = head_on_world(flat_bow, gap=0.5)
        struck = [(tau, events) for tau, events in drive(world, 50) if events]
        assert struck
        tau_env, _ = struck[0]
        assert tau_env[0] < 0.0
        assert tau_env[1] == pytest.approx(0.0, abs=1e-6 * abs(tau_env[0]))
        assert tau_env[2] == pytest.approx(0.0, abs=1e-6 * abs(tau_env[0]))
        assert world.collided == {0}
        assert 0 in world.pushed

    def test_tau_env_is_mean_of_event_forces(self, flat_bow):
        world = head_on_world(flat_bow, gap=0.5)
        substeps = int(round(DT_CTRL / world.params.dt_sim))
        for tau_env, events in drive(world, 50):
            total = np.sum([e.force for e in events], axis=0) if events else np.zeros(3)
            assert tau_env == pytest.approx(total / substeps, rel=1e-12, abs=1e-9)

    def test_event_bookkeeping(self, flat_bow):
        world = head_on_world(flat_bow, gap=0.5)
        events = [e for _, step in drive(world, 50) for e in step]
        floe = world.floes[0]
        for e in events:
            assert e.impulse >= 0.0
            assert e.impact_force == pytest.approx(e.impulse / world.params.dt_sim)
            expected = (0.5 * e.floe_mass * (e.post_velocity[0] ** 2 + e.post_velocity[1] ** 2
                                             - e.pre_velocity[0] ** 2 - e.pre_velocity[1] ** 2)
                        + 0.5 * floe.inertia * (e.post_velocity[2] ** 2 - e.pre_velocity[2] ** 2))
            assert e.delta_k_ice == pytest.approx(expected)

    def test_ship_loss_matches_closed_form(self, flat_bow):
        world = head_on_world(flat_bow, gap=0.5, params=PhysicsConfig(restitution=0.0))
        first = next(e for _, step in drive(world, 50) for e in step)
        floe = world.floes[0]
        expected = ke_loss(0.0, floe.radius, floe.mass, SHIP_MASS, 2.0)
        assert -first.delta_k_ship == pytest.approx(expected, rel=0.10)

    def test_events_reach_listeners(self, flat_bow):
        world = head_on_world(flat_bow, gap=0.5)
        seen = []
        world.emitter.add_listener(seen.append)
        events = [e for _, step in drive(world, 50) for e in step]
        assert seen == events

    def test_deterministic(self, flat_bow):
        runs = []
        for _ in range(2):
            world = head_on_world(flat_bow, gap=0.5, extra=(square(12.0, 31.0, 1.5), square(16.0, 28.0, 1.0)))
            events = [e.to_dict() for _, step in drive(world, 100) for e in step]
            runs.append((events, np.array([f.position for f in world.floes])))
        assert runs[0][0] == runs[1][0]
        assert np.array_equal(runs[0][1], runs[1][1])

    def test_floe_held_by_wall(self, flat_bow):
        world = create_world(make_field([square(100.0, 1.5, 1.0)]), Pose(0.0, 30.0, 0.0), flat_bow, SHIP_MASS)
        floe = world.floes[0]
        floe.velocity = np.array([0.0, -1.0])
        floe.moved = True
        for _ in range(100):
            step_world(world, world.ship.pose, np.zeros(3), DT_CTRL)
            assert floe.vertices[:, 1].min() >= -0.01
        assert floe.velocity[1] >= 0.0
