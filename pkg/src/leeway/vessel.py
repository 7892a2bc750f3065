"""Kinematic surface-vessel simulation and a waypoint-seeking PID navigator.

The hull is a unicycle: propulsion moves it along its heading at
``water_speed`` and the environment adds drift, ``k_current * current +
k_wind * wind``, on top. The navigator steers toward the bearing of its
active waypoint with a heading PID whose output is a turn-rate request, and
regulates ground speed with a second PID.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Protocol, Sequence

import numpy as np

from .displacement import RelativeReading, absolute_to_relative
from .forcefield import ForceField, Source, UniformField
from .geo import DomainError, LocalPoint, Pose, bearing, distance, normalize_angle
from .mission import Mission, TrajectoryLog, Waypoint

DEFAULT_DT = 0.1
TIMEOUT_FACTOR = 10.0


@dataclass(frozen=True)
class VesselParams:
    max_speed: float = 4.0
    max_accel: float = 1.0
    max_turn_rate: float = 0.5
    k_wind: float = 0.05
    k_current: float = 1.0

    def __post_init__(self) -> None:
        for name in ("max_speed", "max_accel", "max_turn_rate", "k_wind", "k_current"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be > 0, got {v!r}")
        if self.k_wind > 1 or self.k_current > 1:
            raise DomainError("drift couplings must not exceed 1")


@dataclass(frozen=True)
class VesselState:
    pose: Pose
    water_speed: float = 0.0
    ground_vel: tuple[float, float] = (0.0, 0.0)
    time: float = 0.0

    @property
    def position(self) -> LocalPoint:
        return self.pose.position

    @property
    def heading(self) -> float:
        return self.pose.heading


@dataclass(frozen=True)
class LoopGains:
    kp: float
    ki: float
    kd: float

    def __post_init__(self) -> None:
        if min(self.kp, self.ki, self.kd) < 0:
            raise DomainError("PID gains must be >= 0")


@dataclass(frozen=True)
class PidGains:
    heading: LoopGains = LoopGains(1.2, 0.05, 0.3)
    speed: LoopGains = LoopGains(0.8, 0.1, 0.0)
    integral_limit: float = 10.0

    def __post_init__(self) -> None:
        if not self.integral_limit > 0:
            raise DomainError("integral_limit must be > 0")


@dataclass(frozen=True)
class PidMemory:
    heading_integral: float = 0.0
    heading_error: Optional[float] = None
    speed_integral: float = 0.0
    speed_error: Optional[float] = None


@dataclass(frozen=True)
class Command:
    """Navigator output.

    ``turn_rate`` is the heading loop's request in rad/s; when it is None the
    hull slews toward ``target_heading`` as fast as it can.
    """

    target_heading: float
    target_speed: float
    turn_rate: Optional[float] = None


def _pid(g: LoopGains, error: float, integral: float, prev: Optional[float],
         dt: float, limit: float, integrate: bool = True) -> tuple[float, float]:
    if integrate:
        integral = min(max(integral + error * dt, -limit), limit)
    deriv = 0.0 if prev is None else (error - prev) / dt
    return g.kp * error + g.ki * integral + g.kd * deriv, integral


def pid_step(state: VesselState, wp: Waypoint, gains: PidGains, dt: float,
             memory: PidMemory = PidMemory(),
             max_speed: float = math.inf,
             max_accel: float = math.inf) -> tuple[Command, PidMemory]:
    if not 0 < dt <= 1:
        raise DomainError(f"dt must be in (0, 1], got {dt}")
    target_heading = bearing(state.position, wp.position)
    if distance(state.position, wp.position) <= 1e-12:
        target_heading = state.heading
    h_err = normalize_angle(target_heading - state.heading)
    turn, h_int = _pid(gains.heading, h_err, memory.heading_integral,
                       memory.heading_error, dt, gains.integral_limit)

    sog = math.hypot(*state.ground_vel)
    s_err = wp.speed - sog
    dv, s_int = _pid(gains.speed, s_err, memory.speed_integral,
                     memory.speed_error, dt, gains.integral_limit)
    target_speed = min(max(wp.speed + dv, 0.0), max_speed)
    if abs(target_speed - state.water_speed) > max_accel * dt:
        # hull is acceleration-limited: hold the integral (anti-windup)
        dv, s_int = _pid(gains.speed, s_err, memory.speed_integral,
                         memory.speed_error, dt, gains.integral_limit, integrate=False)
        target_speed = min(max(wp.speed + dv, 0.0), max_speed)
    return (Command(target_heading, target_speed, turn),
            PidMemory(h_int, h_err, s_int, s_err))


def drift(p: LocalPoint, field_wind: ForceField, field_current: ForceField,
          params: VesselParams) -> tuple[tuple[float, float], tuple[float, float], float, float]:
    wind = field_wind.query(p)
    cur = field_current.query(p)
    dx = params.k_current * cur[0] + params.k_wind * wind[0]
    dy = params.k_current * cur[1] + params.k_wind * wind[1]
    return wind, cur, dx, dy


def step(state: VesselState, cmd: Command, field_wind: ForceField,
         field_current: ForceField, params: VesselParams, dt: float) -> VesselState:
    """Advance one explicit-Euler step of length ``dt``."""
    if not 0 < dt <= 1:
        raise DomainError(f"dt must be in (0, 1], got {dt}")
    max_dpsi = params.max_turn_rate * dt
    if cmd.turn_rate is None:
        err = normalize_angle(cmd.target_heading - state.heading)
        dpsi = min(max(err, -max_dpsi), max_dpsi)
    else:
        dpsi = min(max(cmd.turn_rate * dt, -max_dpsi), max_dpsi)
    target_speed = min(max(cmd.target_speed, 0.0), params.max_speed)
    max_dv = params.max_accel * dt
    dv = min(max(target_speed - state.water_speed, -max_dv), max_dv)
    heading = normalize_angle(state.heading + dpsi)
    speed = min(max(state.water_speed + dv, 0.0), params.max_speed)

    _, _, dx, dy = drift(state.position, field_wind, field_current, params)
    gvx = speed * math.cos(heading) + dx
    gvy = speed * math.sin(heading) + dy
    p = state.position
    pos = LocalPoint(p.x + gvx * dt, p.y + gvy * dt)
    return VesselState(Pose(pos, heading), speed, (gvx, gvy), state.time + dt)


class Augmenter(Protocol):
    def tick(self, state: VesselState, true_wp: Waypoint, now: float,
             readings: Sequence[RelativeReading]) -> Waypoint: ...


def initial_state(mission: Mission, heading: Optional[float] = None) -> VesselState:
    if heading is None:
        first = mission.waypoints[0].position
        heading = bearing(mission.start, first) if distance(mission.start, first) > 1e-9 else 0.0
    return VesselState(Pose(mission.start, heading), 0.0, (0.0, 0.0), 0.0)


def run_mission(mission: Mission, gains: PidGains = PidGains(),
                params: VesselParams = VesselParams(),
                field_wind: ForceField = UniformField(),
                field_current: ForceField = UniformField(),
                dt: float = DEFAULT_DT,
                augmenter: Optional[Augmenter] = None,
                start_heading: Optional[float] = None,
                timeout: Optional[float] = None,
                sensor_noise: float = 0.0,
                rng: Optional[np.random.Generator] = None) -> TrajectoryLog:
    """Fly ``mission`` and record every tick.

    With an augmenter, the navigator is handed the augmenter's intermediate
    waypoint in place of the true one. The run stops once the last waypoint
    is inside the acceptance radius, or after ``timeout`` seconds (default:
    ten times the straight-line time at the slowest leg speed), in which
    case the log is flagged ``timed_out``.

    ``sensor_noise`` adds zero-mean Gaussian noise (m/s per component) to the
    wind and current the augmenter's sensors report; the log keeps the true
    values. It needs ``rng`` so runs stay reproducible.
    """
    if not 0 < dt <= 1:
        raise DomainError(f"dt must be in (0, 1], got {dt}")
    for w in mission.waypoints:
        if w.speed > params.max_speed:
            raise DomainError(f"waypoint speed {w.speed} exceeds max_speed {params.max_speed}")
    if sensor_noise < 0:
        raise DomainError("sensor_noise must be >= 0")
    if sensor_noise > 0 and rng is None:
        raise DomainError("sensor_noise needs a seeded rng")
    if timeout is None:
        timeout = TIMEOUT_FACTOR * mission.straight_line_time()
        if not math.isfinite(timeout):
            timeout = 3600.0
    n_steps = int(math.ceil(timeout / dt))

    state = initial_state(mission, start_heading)
    memory = PidMemory()
    rows: list[tuple] = []
    wps = mission.waypoints
    idx = 0
    radius = mission.acceptance_radius
    readings: list[RelativeReading] = []

    def advance(i: int, s: VesselState) -> int:
        while i < len(wps) and distance(s.position, wps[i].position) <= radius:
            i += 1
        return i

    idx = advance(idx, state)
    timed_out = False
    k = 0
    while True:
        p = state.position
        wind, cur, _, _ = drift(p, field_wind, field_current, params)
        if idx >= len(wps):
            last = wps[-1].position
            rows.append((state.time, p.x, p.y, state.heading, state.water_speed,
                         *state.ground_vel, idx, last.x, last.y, last.x, last.y,
                         *wind, *cur))
            break
        true_wp = wps[idx]
        if augmenter is not None:
            sw, sc = wind, cur
            if sensor_noise > 0:
                e = rng.normal(0.0, sensor_noise, 4)
                sw, sc = (wind[0] + e[0], wind[1] + e[1]), (cur[0] + e[2], cur[1] + e[3])
            readings.append(absolute_to_relative(sw, Source.WIND, state.pose, state.ground_vel, state.time))
            readings.append(absolute_to_relative(sc, Source.CURRENT, state.pose, state.ground_vel, state.time))
            del readings[:-6]
            nav_wp = augmenter.tick(state, true_wp, state.time, readings)
        else:
            nav_wp = true_wp
        rows.append((state.time, p.x, p.y, state.heading, state.water_speed,
                     *state.ground_vel, idx, true_wp.position.x, true_wp.position.y,
                     nav_wp.position.x, nav_wp.position.y, *wind, *cur))
        if k >= n_steps:
            timed_out = True
            break
        cmd, memory = pid_step(state, nav_wp, gains, dt, memory, params.max_speed,
                               params.max_accel)
        state = step(state, cmd, field_wind, field_current, params, dt)
        # accumulate time from the tick count so long runs do not drift
        k += 1
        state = replace(state, time=k * dt)
        idx = advance(idx, state)

    cols = np.array(rows, dtype=float).T
    return TrajectoryLog(*cols[:7], cols[7].astype(np.int64), *cols[8:],
                         timed_out=timed_out, n_waypoints=len(wps))


def sign_changes(values: np.ndarray, deadband: float = 0.0) -> int:
    """Number of sign flips in ``values``, ignoring samples inside the deadband."""
    last = 0
    flips = 0
    for v in values:
        if abs(v) <= deadband:
            continue
        s = 1 if v > 0 else -1
        if last and s != last:
            flips += 1
        last = s
    return flips
