"""Feed-forward waypoint augmentation.

Rather than touching the navigator's heading or speed loops, the augmenter
moves the waypoint it is chasing. Forces are estimated either from the live
hull sensors or from fitted GP maps, pushed through the displacement model,
and the predicted drift is mirrored onto the target: the navigator is sent to
an intermediate waypoint placed opposite to where the forces would carry it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .displacement import (
    DEFAULT_K_WIND,
    DEFAULT_WINDOW_S,
    SCHEMA_COMBINED,
    DisplacementModel,
    RelativeReading,
    latest,
    make_features,
    predict_displacement,
    relative_to_absolute,
)
from .forcefield import GpForceMap, Source, predict
from .geo import DomainError, LocalPoint, bearing, distance, from_path_frame
from .mission import DEFAULT_ACCEPTANCE_RADIUS_M, Waypoint
from .vessel import VesselState

SPEED_REFERENCE_LENGTH_M = 10.0


class EstimationError(RuntimeError):
    """Force data for one of the sources is missing."""


class ForceSource(str, Enum):
    LIVE = "live"
    MAP = "map"


class Horizon(str, Enum):
    """How far ahead the per-window displacement prediction is projected.

    ``window`` uses the model output as is; ``leg`` scales it by the number
    of prediction windows left before the vessel reaches the waypoint.
    """

    WINDOW = "window"
    LEG = "leg"


@dataclass(frozen=True)
class AugmentConfig:
    gain: float = 1.0
    replan_period: float = 1.0
    speed_beta: float = 0.2
    speed_bounds: tuple[float, float] = (0.5, 4.0)
    max_offset: float = 15.0
    source: ForceSource = ForceSource.LIVE
    horizon: Horizon = Horizon.WINDOW
    window: float = DEFAULT_WINDOW_S
    k_wind: float = DEFAULT_K_WIND
    median_filter: bool = False
    # map mode: drop predicted error components within this many posterior sigmas
    significance: float = 0.0

    def __post_init__(self) -> None:
        lo, hi = self.speed_bounds
        if not self.gain >= 0:
            raise DomainError("gain must be >= 0")
        if not self.replan_period > 0:
            raise DomainError("replan_period must be > 0")
        if not 0 <= lo <= hi:
            raise DomainError("speed_bounds must satisfy 0 <= min <= max")
        if not self.max_offset > 0:
            raise DomainError("max_offset must be > 0")
        if not self.window > 0:
            raise DomainError("window must be > 0")
        if not self.significance >= 0:
            raise DomainError("significance must be >= 0")
        object.__setattr__(self, "source", ForceSource(self.source))
        object.__setattr__(self, "horizon", Horizon(self.horizon))

    def check_vessel(self, max_speed: float) -> None:
        if self.speed_bounds[1] > max_speed:
            raise DomainError(
                f"speed_bounds max {self.speed_bounds[1]} exceeds vessel max_speed {max_speed}"
            )


Vec = tuple[float, float]


def force_estimate(state: VesselState, source: ForceSource,
                   readings: Optional[Sequence[RelativeReading]] = None,
                   maps: Optional[tuple[GpForceMap, GpForceMap]] = None,
                   median_of: int = 1) -> tuple[Vec, Vec]:
    """World-frame (wind, current) acting on the vessel right now."""
    source = ForceSource(source)
    if source is ForceSource.MAP:
        if maps is None or len(maps) != 2 or any(m is None for m in maps):
            raise EstimationError("map mode needs both a wind map and a current map")
        (wind, _), (cur, _) = predict(maps[0], state.position), predict(maps[1], state.position)
        return wind, cur
    out = []
    for src in (Source.WIND, Source.CURRENT):
        r = latest(readings or (), src, median_of)
        if r is None:
            raise EstimationError(f"no {src.value} reading available")
        out.append(relative_to_absolute(r, state.pose, state.ground_vel))
    return out[0], out[1]


def map_force_variance(state: VesselState, maps: tuple[GpForceMap, GpForceMap],
                       k_wind: float) -> Vec:
    """Posterior variance of the combined force ``k_wind * wind + current``."""
    (_, vw), (_, vc) = predict(maps[0], state.position), predict(maps[1], state.position)
    return k_wind**2 * vw[0] + vc[0], k_wind**2 * vw[1] + vc[1]


def error_std(model: DisplacementModel, force_var: Vec, course: float) -> Vec:
    """Standard deviation of the predicted (along, cross) error due to force noise.

    Components are treated as independent; only the combined-force columns
    of the model carry uncertainty.
    """
    c, s = math.cos(course), math.sin(course)
    var_along = c * c * force_var[0] + s * s * force_var[1]
    var_cross = s * s * force_var[0] + c * c * force_var[1]
    w = model.weights
    if model.schema != SCHEMA_COMBINED:
        # wind/current columns scaled separately; bound with the current columns
        wa, wc = w[:, 2], w[:, 3]
    else:
        wa, wc = w[:, 0], w[:, 1]
    return (math.sqrt(wa[0]**2 * var_along + wc[0]**2 * var_cross),
            math.sqrt(wa[1]**2 * var_along + wc[1]**2 * var_cross))


def leg_course(true_wp: Waypoint, state: VesselState,
               leg_start: Optional[LocalPoint] = None) -> float:
    """Direction of the active leg; falls back to vessel -> waypoint."""
    if leg_start is not None and distance(leg_start, true_wp.position) > 1e-9:
        return bearing(leg_start, true_wp.position)
    return bearing(state.position, true_wp.position)


def window_error(true_wp: Waypoint, forces: tuple[Vec, Vec], course: float,
                 model: DisplacementModel, config: AugmentConfig) -> tuple[float, float]:
    f = make_features(forces[0], forces[1], course, true_wp.speed, config.k_wind)
    return predict_displacement(model, f)


def predicted_error(true_wp: Waypoint, state: VesselState, forces: tuple[Vec, Vec],
                    model: DisplacementModel, config: AugmentConfig,
                    course: float) -> tuple[float, float]:
    ea, ec = window_error(true_wp, forces, course, model, config)
    if config.horizon is Horizon.LEG and true_wp.speed > 0:
        n = distance(state.position, true_wp.position) / (true_wp.speed * config.window)
        ea, ec = n * ea, n * ec
    return ea, ec


def intermediate_waypoint(true_wp: Waypoint, state: VesselState, forces: tuple[Vec, Vec],
                          model: DisplacementModel, config: AugmentConfig,
                          acceptance_radius: float = DEFAULT_ACCEPTANCE_RADIUS_M,
                          leg_start: Optional[LocalPoint] = None) -> Waypoint:
    """Shift ``true_wp`` against the predicted displacement.

    The offset is ``-gain * e`` expressed in the path frame of the leg
    (``leg_start`` -> ``true_wp``, or vessel -> waypoint when no leg start is
    known) and capped at ``max_offset`` meters.
    """
    if distance(state.position, true_wp.position) <= acceptance_radius:
        return true_wp
    course = leg_course(true_wp, state, leg_start)
    ea, ec = predicted_error(true_wp, state, forces, model, config, course)
    return _shifted(true_wp, course, ea, ec, config)


def _shifted(true_wp: Waypoint, course: float, ea: float, ec: float,
             config: AugmentConfig) -> Waypoint:
    if ea == 0.0 and ec == 0.0 or config.gain == 0.0:
        return true_wp
    if config.horizon is Horizon.LEG:
        # along-track error over a whole leg is a timing effect, left to the speed law
        ea = 0.0
    ox, oy = from_path_frame(-config.gain * ea, -config.gain * ec, course)
    mag = math.hypot(ox, oy)
    if mag > config.max_offset:
        ox, oy = ox * config.max_offset / mag, oy * config.max_offset / mag
    p = true_wp.position
    return Waypoint(LocalPoint(p.x + ox, p.y + oy), true_wp.speed)


def adjust_speed(leg_speed: float, predicted: tuple[float, float],
                 config: AugmentConfig) -> float:
    """Raise the speed when the vessel is predicted to lag, lower it on overshoot."""
    lo, hi = config.speed_bounds
    v = leg_speed * (1.0 + config.speed_beta * (-predicted[0]) / SPEED_REFERENCE_LENGTH_M)
    return min(max(v, lo), hi)


@dataclass
class AugmenterState:
    """Per-run augmenter; holds the replanning cache.

    Use one instance per mission run.
    """

    model: DisplacementModel
    config: AugmentConfig = AugmentConfig()
    maps: Optional[tuple[GpForceMap, GpForceMap]] = None
    acceptance_radius: float = DEFAULT_ACCEPTANCE_RADIUS_M
    last_replan_time: Optional[float] = None
    current_intermediate: Optional[Waypoint] = None
    leg_start: Optional[LocalPoint] = None
    _target: Optional[Waypoint] = field(default=None, repr=False)

    @property
    def source(self) -> ForceSource:
        return self.config.source

    def tick(self, state: VesselState, true_wp: Waypoint, now: float,
             readings: Sequence[RelativeReading] = ()) -> Waypoint:
        fresh = (
            self.current_intermediate is None
            or true_wp != self._target
            or now - self.last_replan_time >= self.config.replan_period - 1e-9
        )
        if not fresh:
            return self.current_intermediate
        if true_wp != self._target:
            # the leg starts where the previous target was, or where we are now
            self.leg_start = state.position if self._target is None else self._target.position
        self.current_intermediate = self._plan(state, true_wp, readings)
        self.last_replan_time = now
        self._target = true_wp
        return self.current_intermediate

    def _plan(self, state: VesselState, true_wp: Waypoint,
              readings: Sequence[RelativeReading]) -> Waypoint:
        cfg = self.config
        if cfg.gain == 0.0 or self.model.is_zero():
            return true_wp
        if distance(state.position, true_wp.position) <= self.acceptance_radius:
            return true_wp
        forces = force_estimate(state, cfg.source, readings, self.maps,
                                3 if cfg.median_filter else 1)
        course = leg_course(true_wp, state, self.leg_start)
        ea, ec = predicted_error(true_wp, state, forces, self.model, cfg, course)
        if cfg.significance > 0 and cfg.source is ForceSource.MAP:
            ea, ec = self._gate(state, true_wp, course, ea, ec)
        shifted = _shifted(true_wp, course, ea, ec, cfg)
        lo, hi = cfg.speed_bounds
        if lo <= true_wp.speed <= hi:
            # speed reacts to the per-window prediction, never the leg-scaled one
            speed = adjust_speed(true_wp.speed,
                                 window_error(true_wp, forces, course, self.model, cfg), cfg)
        else:
            speed = true_wp.speed
        return Waypoint(shifted.position, speed)


    def _gate(self, state: VesselState, true_wp: Waypoint, course: float,
              ea: float, ec: float) -> tuple[float, float]:
        sa, sc = error_std(self.model, map_force_variance(state, self.maps, self.config.k_wind),
                           course)
        cfg = self.config
        if cfg.horizon is Horizon.LEG and true_wp.speed > 0:
            n = distance(state.position, true_wp.position) / (true_wp.speed * cfg.window)
            sa, sc = n * sa, n * sc
        z = cfg.significance
        return (0.0 if abs(ea) < z * sa else ea), (0.0 if abs(ec) < z * sc else ec)


def augmenter_tick(aug: AugmenterState, state: VesselState, true_wp: Waypoint,
                   now: float, data: Sequence[RelativeReading] = ()) -> Waypoint:
    return aug.tick(state, true_wp, now, data)
