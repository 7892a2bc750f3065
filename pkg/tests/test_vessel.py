import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import straight_mission
from leeway.augment import AugmentConfig, AugmenterState
from leeway.displacement import DisplacementModel
from leeway.forcefield import UniformField, synthetic_field
from leeway.geo import DomainError, LocalPoint, Pose
from leeway.mission import Mission, Waypoint
from leeway.vessel import (
    Command,
    LoopGains,
    PidGains,
    PidMemory,
    VesselParams,
    VesselState,
    pid_step,
    run_mission,
    sign_changes,
    step,
)

ZERO = UniformField((0.0, 0.0))
P = VesselParams()


def at(x, y, heading=0.0, speed=0.0):
    return VesselState(Pose(LocalPoint(x, y), heading), speed)


# --- pid_step ------------------------------------------------------------------


def test_pid_wp_ahead_has_zero_heading_error():
    cmd, mem = pid_step(at(0, 0), Waypoint(LocalPoint(50, 0), 3.0), PidGains(), 0.1)
    assert cmd.target_heading == 0.0
    assert mem.heading_error == 0.0


def test_pid_wp_north_targets_half_pi():
    cmd, _ = pid_step(at(0, 0), Waypoint(LocalPoint(0, 50), 3.0), PidGains(), 0.1)
    assert cmd.target_heading == pytest.approx(math.pi / 2)


def test_pid_p_only_turn_request():
    g = PidGains(heading=LoopGains(1.7, 0.0, 0.0))
    e = 0.3
    wp = Waypoint(LocalPoint(100 * math.cos(e), 100 * math.sin(e)), 3.0)
    cmd, _ = pid_step(at(0, 0), wp, g, 0.1)
    assert cmd.turn_rate == pytest.approx(1.7 * e, abs=1e-12)


def test_pid_integral_clamped():
    g = PidGains(heading=LoopGains(0.0, 1.0, 0.0), integral_limit=0.5)
    mem = PidMemory()
    wp = Waypoint(LocalPoint(0, 100), 3.0)
    for _ in range(100):
        _, mem = pid_step(at(0, 0), wp, g, 1.0, mem)
    assert mem.heading_integral == 0.5


def test_pid_rejects_bad_dt():
    for dt in (0.0, 1.5):
        with pytest.raises(DomainError):
            pid_step(at(0, 0), Waypoint(LocalPoint(1, 0), 1.0), PidGains(), dt)


# --- step ------------------------------------------------------------------------


def test_step_straight_line():
    s = step(at(0, 0, 0.0, 2.0), Command(0.0, 2.0), ZERO, ZERO, P, 1.0)
    assert (s.position.x, s.position.y) == (2.0, 0.0)


def test_step_pure_drift():
    s = step(at(0, 0), Command(0.0, 0.0), ZERO, UniformField((0.5, 0.0)), P, 1.0)
    s = step(s, Command(0.0, 0.0), ZERO, UniformField((0.5, 0.0)), P, 1.0)
    assert (s.position.x, s.position.y) == pytest.approx((1.0, 0.0))


def test_step_pure_drift_single_two_second_step():
    params = VesselParams(k_current=1.0)
    p = at(0, 0)
    s = step(p, Command(0.0, 0.0), ZERO, UniformField((0.5, 0.0)), params, 1.0)
    assert s.position.x == 0.5
    # dt of 2 s is outside the allowed range
    with pytest.raises(DomainError):
        step(p, Command(0.0, 0.0), ZERO, UniformField((0.5, 0.0)), params, 2.0)


def test_step_turn_rate_limit():
    s = step(at(0, 0, 0.0), Command(math.pi / 2, 0.0), ZERO, ZERO, P, 0.1)
    assert s.heading == pytest.approx(0.05, abs=1e-15)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5),
       st.floats(0.01, 1.0))
def test_drift_superposition(cx, cy, wx, wy, dt):
    params = VesselParams(k_wind=0.05, k_current=1.0)
    s = step(at(3, 4), Command(0.0, 0.0), UniformField((wx, wy)), UniformField((cx, cy)),
             params, dt)
    assert s.position.x - 3 == pytest.approx(dt * (cx + 0.05 * wx), abs=1e-12)
    assert s.position.y - 4 == pytest.approx(dt * (cy + 0.05 * wy), abs=1e-12)


def test_params_validation():
    with pytest.raises(DomainError):
        VesselParams(max_speed=0.0)
    with pytest.raises(DomainError):
        VesselParams(k_wind=2.0)
    with pytest.raises(DomainError):
        LoopGains(-1.0, 0.0, 0.0)


# --- run_mission -------------------------------------------------------------------


def test_zero_field_reaches_waypoint_on_line():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(100, 0), 3.0),))
    log = run_mission(m)
    assert log.completed(m) and not log.timed_out
    assert np.max(np.abs(log.cross_track(m))) < 0.5
    assert math.hypot(log.x[-1] - 100, log.y[-1]) <= m.acceptance_radius


@settings(max_examples=20, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(30, 300), st.floats(1.0, 4.0))
def test_zero_field_completes_any_heading(h, length, v):
    m = straight_mission(length, v, heading=h)
    log = run_mission(m)
    assert log.completed(m)
    assert math.hypot(log.x[-1] - m.waypoints[0].position.x,
                      log.y[-1] - m.waypoints[0].position.y) <= m.acceptance_radius


def test_crosscurrent_pid_only_leaves_offset():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(100, 0), 3.0),))
    log = run_mission(m, field_current=UniformField((0.0, 1.0)))
    cte = log.cross_track(m)
    assert np.max(np.abs(cte)) > 0.5 or sign_changes(cte) >= 2


def test_limits_hold_every_tick():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(0, 150), 3.5),
                                   Waypoint(LocalPoint(-150, 0), 2.0)))
    log = run_mission(m, field_current=synthetic_field("vortex", center=(0, 50), strength=50.0))
    dt = np.diff(log.t)
    dpsi = np.abs((np.diff(log.heading) + np.pi) % (2 * np.pi) - np.pi)
    assert np.all(dpsi <= P.max_turn_rate * dt + 1e-12)
    assert np.all(np.abs(np.diff(log.water_speed)) <= P.max_accel * dt + 1e-12)
    assert np.all(log.water_speed <= P.max_speed) and np.all(log.water_speed >= 0)


def test_timeout_flags_log():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(100, 0), 1.0),))
    log = run_mission(m, field_current=UniformField((-3.0, 0.0)), timeout=20.0)
    assert log.timed_out and not log.completed(m)
    assert log.t[-1] == pytest.approx(20.0)


def test_run_is_deterministic():
    m = straight_mission(200.0, 3.0, heading=1.0)
    f = synthetic_field("shear", axis="y", rate=0.005, base=(0.2, 0.0))
    assert run_mission(m, field_current=f).equals(run_mission(m, field_current=f))


def test_sensor_noise_needs_rng_and_is_seeded():
    m = straight_mission(100.0, 3.0)
    aug = lambda: AugmenterState(DisplacementModel(np.zeros((2, 4))))  # noqa: E731
    with pytest.raises(DomainError):
        run_mission(m, augmenter=aug(), sensor_noise=0.1)
    with pytest.raises(DomainError):
        run_mission(m, sensor_noise=-1.0)
    a = run_mission(m, augmenter=aug(), sensor_noise=0.1, rng=np.random.default_rng(3))
    b = run_mission(m, augmenter=aug(), sensor_noise=0.1, rng=np.random.default_rng(3))
    assert a.equals(b)


def test_waypoint_speed_above_max_rejected():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(100, 0), 5.0),))
    with pytest.raises(DomainError):
        run_mission(m)


def test_zero_model_augmenter_is_identical():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(100, 0), 3.0),))
    cur = UniformField((0.0, 1.0))
    base = run_mission(m, field_current=cur)
    zero = AugmenterState(DisplacementModel(np.zeros((2, 4))), AugmentConfig(gain=3.0))
    assert run_mission(m, field_current=cur, augmenter=zero).equals(base)


def test_dt_halving_changes_path_under_two_percent():
    m = Mission(LocalPoint(0, 0), (Waypoint(LocalPoint(200, 0), 3.0),))
    cur = UniformField((0.0, 0.8))
    a = run_mission(m, field_current=cur, dt=0.1)
    b = run_mission(m, field_current=cur, dt=0.05)
    # compare positions at common times
    bi = np.searchsorted(b.t, a.t - 1e-9)
    n = min(len(a), int(np.sum(bi < len(b))))
    d = np.hypot(a.x[:n] - b.x[bi[:n]], a.y[:n] - b.y[bi[:n]])
    assert np.max(d) / 200.0 < 0.02


def test_sign_changes_oracle():
    assert sign_changes(np.array([1.0, -1.0, 2.0, -0.5])) == 3
    assert sign_changes(np.array([1.0, -0.5, 2.0, -3.0]), deadband=1.0) == 1
    assert sign_changes(np.array([0.0, 0.0])) == 0
