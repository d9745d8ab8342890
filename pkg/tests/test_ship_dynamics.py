#!/usr/bin/env python3
"""
Tests for the 3-DOF vessel model, DP controller, thrust allocation and speed profile
"""

import math

import numpy as np
import pytest

from app.core.errors import ConfigError
from app.core.geometry import Pose
from app.simulation.ship_dynamics import (ShipState, VelocityProfile, allocate_thrust, default_vessel,
                                          dp_control, dp_gains, load_vessel, make_velocity_profile,
                                          save_vessel, step_vessel)


@pytest.fixture
def vessel():
    return default_vessel()


class TestVesselModel:
    """Model construction and interchange"""

    def test_scaling(self):
        half = default_vessel(0.5)
        assert half.mass == pytest.approx(6.0e6 / 8.0)
        assert half.footprint.length == pytest.approx(38.1)
        assert np.allclose(half.force_limits, default_vessel().force_limits / 8.0)

    def test_invalid_scale(self):
        with pytest.raises(ConfigError):
            default_vessel(0.0)

    def test_mass_matrix_inverts_b(self, vessel):
        assert np.allclose(vessel.M @ vessel.B, np.eye(3))

    def test_save_and_load(self, vessel, tmp_path):
        path = tmp_path / "vessel.json"
        save_vessel(vessel, str(path))
        loaded = load_vessel(str(path))
        assert np.allclose(loaded.A, vessel.A)
        assert np.allclose(loaded.TK, vessel.TK)
        assert loaded.mass == vessel.mass
        assert loaded.footprint.length == vessel.footprint.length

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "vessel.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_vessel(str(path))

    def test_non_finite_velocity(self):
        with pytest.raises(ConfigError):
            ShipState(Pose(0.0, 0.0, 0.0), np.array([math.nan, 0.0, 0.0]))


class TestStepVessel:
    """RK4 integration"""

    def test_rest_stays_at_rest(self, vessel):
        state = ShipState(Pose(5.0, 6.0, 0.5))
        after = step_vessel(state, np.zeros(3), np.zeros(3), vessel, 0.1)
        assert after.eta.as_array() == pytest.approx(state.eta.as_array())
        assert after.nu == pytest.approx(np.zeros(3))

    def test_converges_to_steady_state(self, vessel):
        tau = np.array([1.0e5, 0.0, 0.0])
        state = ShipState(Pose(0.0, 0.0, 0.0))
        for _ in range(2000):
            state = step_vessel(state, tau, np.zeros(3), vessel, 0.5)
        expected = -np.linalg.solve(vessel.A, vessel.B @ tau)
        assert state.nu == pytest.approx(expected, rel=1e-3, abs=1e-9)

    def test_environment_force_adds_to_control(self, vessel):
        state = ShipState(Pose(0.0, 0.0, 0.0), np.array([1.0, 0.0, 0.0]))
        split = step_vessel(state, np.array([5.0e4, 0.0, 0.0]), np.array([-2.0e4, 0.0, 0.0]), vessel, 1.0)
        total = step_vessel(state, np.array([3.0e4, 0.0, 0.0]), np.zeros(3), vessel, 1.0)
        assert split.nu == pytest.approx(total.nu)

    def test_kinematics_follow_heading(self, vessel):
        state = ShipState(Pose(0.0, 0.0, math.pi / 2.0), np.array([1.0, 0.0, 0.0]))
        after = step_vessel(state, np.zeros(3), np.zeros(3), vessel, 1.0)
        assert after.eta.x == pytest.approx(0.0, abs=1e-9)
        assert 0.9 < after.eta.y < 1.0

    def test_world_velocity(self):
        state = ShipState(Pose(0.0, 0.0, math.pi / 2.0), np.array([2.0, 1.0, 0.1]))
        assert state.world_velocity() == pytest.approx([-1.0, 2.0, 0.1])
        assert state.speed == pytest.approx(math.sqrt(5.0))


class TestDpControl:
    """Pole-placement DP controller"""

    def test_gains(self, vessel):
        gains = dp_gains(vessel, 0.05, 1.0)
        assert np.allclose(gains.Kp, 0.0025 * vessel.M)
        assert np.all(np.linalg.eigvalsh(gains.Kd) > 0)

    def test_invalid_gains(self, vessel):
        with pytest.raises(ConfigError):
            dp_gains(vessel, 0.0)

    def test_zero_error_gives_zero_force(self, vessel):
        gains = dp_gains(vessel)
        state = ShipState(Pose(10.0, 5.0, 0.3), np.array([2.0, 0.0, 0.0]))
        tau = dp_control(state, Pose(10.0, 5.0, 0.3), 2.0, gains, vessel)
        assert tau == pytest.approx(np.zeros(3), abs=1e-9)

    def test_feed_forward_is_opt_in(self, vessel):
        gains = dp_gains(vessel)
        state = ShipState(Pose(10.0, 5.0, 0.0), np.array([2.0, 0.0, 0.0]))
        tau = dp_control(state, Pose(10.0, 5.0, 0.0), 2.0, gains, vessel, feed_forward=True)
        assert tau == pytest.approx(vessel.D @ np.array([2.0, 0.0, 0.0]))

    def test_pushes_toward_setpoint(self, vessel):
        gains = dp_gains(vessel)
        state = ShipState(Pose(0.0, 0.0, 0.0))
        tau = dp_control(state, Pose(10.0, 0.0, 0.0), 0.0, gains, vessel)
        assert tau[0] > 0.0
        assert tau[1] == pytest.approx(0.0, abs=1e-9)

    def test_saturated(self, vessel):
        gains = dp_gains(vessel)
        state = ShipState(Pose(0.0, 0.0, 0.0))
        tau = dp_control(state, Pose(5000.0, -3000.0, 2.0), 5.0, gains, vessel)
        assert np.all(np.abs(tau) <= vessel.tau_limits + 1e-6)


class TestAllocateThrust:
    """Least-norm thrust allocation"""

    def test_attainable_force_realized(self, vessel):
        tau = np.array([1.0e5, 2.0e4, 1.0e5])
        alloc = allocate_thrust(tau, vessel)
        assert alloc.tau == pytest.approx(tau, rel=1e-9)

    def test_commands_within_limits(self, vessel):
        alloc = allocate_thrust(np.array([1.0e8, -1.0e8, 1.0e9]), vessel)
        assert np.all(np.abs(alloc.u) <= vessel.u_limits + 1e-9)
        assert np.all(np.abs(alloc.tau) <= vessel.tau_limits + 1e-3)

    def test_rpm_sign_follows_command(self, vessel):
        alloc = allocate_thrust(np.array([-1.0e5, 0.0, 0.0]), vessel)
        assert np.all(alloc.rpm[:2] < 0)
        assert alloc.rpm ** 2 == pytest.approx(np.abs(alloc.u))


class TestVelocityProfile:
    """Speed ramp"""

    def test_ramp_then_cruise(self):
        profile = make_velocity_profile(0.0, 2.0, 0.04)
        assert profile.ramp_time == pytest.approx(50.0)
        assert profile.speed_at(25.0) == pytest.approx(1.0)
        assert profile.speed_at(80.0) == pytest.approx(2.0)

    def test_distance_integrates_speed(self):
        profile = make_velocity_profile(0.5, 2.0, 0.04)
        ts = np.linspace(0.0, 100.0, 20001)
        speeds = np.array([profile.speed_at(t) for t in ts])
        numeric = float(np.sum(0.5 * (speeds[1:] + speeds[:-1]) * np.diff(ts)))
        assert profile.distance_at(100.0) == pytest.approx(numeric, rel=1e-6)

    def test_start_above_nominal_clamped(self):
        profile = make_velocity_profile(3.0, 2.0)
        assert profile.U_start == 2.0
        assert profile.distance_at(10.0) == pytest.approx(20.0)

    def test_already_cruising(self):
        assert VelocityProfile(2.0, 2.0).distance_at(5.0) == pytest.approx(10.0)

    def test_invalid_accel(self):
        with pytest.raises(ConfigError):
            make_velocity_profile(0.0, 2.0, 0.0)


@pytest.mark.slow
class TestClosedLoopTracking:
    """DP control, allocation and the vessel model tracking a straight path in open water"""

    def test_straight_path_at_cruise_speed(self, vessel):
        dt, duration = 0.1, 500.0
        gains = dp_gains(vessel)
        profile = make_velocity_profile(0.0, 2.0, 0.04)
        state = ShipState(Pose(0.0, 4.0, 0.02))
        cross_track, heading = [], []
        for k in range(int(round(duration / dt))):
            t = k * dt
            setpoint = Pose(profile.distance_at(t), 0.0, 0.0)
            tau = dp_control(state, setpoint, profile.speed_at(t), gains, vessel, feed_forward=True)
            state = step_vessel(state, allocate_thrust(tau, vessel).tau, np.zeros(3), vessel, dt)
            cross_track.append(abs(state.eta.y))
            heading.append(abs(math.remainder(state.eta.psi, 2.0 * math.pi)))
        assert np.mean(cross_track) <= 2.0
        assert np.mean(heading) <= math.radians(1.0)
        assert state.eta.x == pytest.approx(profile.distance_at(duration), abs=2.0)
        assert state.speed == pytest.approx(2.0, abs=0.05)
