"""Missions, waypoints and executed-trajectory logs."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geo import DomainError, Frame, LocalPoint, cross_track, distance

DEFAULT_ACCEPTANCE_RADIUS_M = 3.0


class DataError(ValueError):
    """A log and a mission do not describe the same run."""


@dataclass(frozen=True)
class Waypoint:
    position: LocalPoint
    speed: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise DomainError(f"waypoint speed must be finite and >= 0, got {self.speed!r}")


@dataclass(frozen=True)
class Mission:
    """Ordered waypoints executed from ``start``.

    The first leg runs from ``start`` to ``waypoints[0]``; leg ``i > 0`` runs
    from ``waypoints[i-1]`` to ``waypoints[i]``.
    """

    start: LocalPoint
    waypoints: tuple[Waypoint, ...]
    acceptance_radius: float = DEFAULT_ACCEPTANCE_RADIUS_M
    frame: Optional[Frame] = None
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(self.waypoints))
        if not self.waypoints:
            raise DomainError("mission needs at least one waypoint")
        if not (math.isfinite(self.acceptance_radius) and self.acceptance_radius > 0):
            raise DomainError("acceptance_radius must be > 0")

    def leg(self, index: int) -> tuple[LocalPoint, LocalPoint]:
        n = len(self.waypoints)
        if not 0 <= index <= n:
            raise DataError(f"waypoint index {index} outside mission of {n} waypoints")
        index = min(index, n - 1)
        a = self.start if index == 0 else self.waypoints[index - 1].position
        return a, self.waypoints[index].position

    def max_speed(self) -> float:
        return max(w.speed for w in self.waypoints)

    def straight_line_time(self) -> float:
        """Total leg length divided by the slowest leg speed."""
        slowest = min(w.speed for w in self.waypoints)
        if slowest <= 0.0:
            return math.inf
        total = sum(distance(*self.leg(i)) for i in range(len(self.waypoints)))
        return total / slowest

    def canonical(self) -> dict:
        d = {
            "start": [self.start.x, self.start.y],
            "waypoints": [[w.position.x, w.position.y, w.speed] for w in self.waypoints],
            "acceptance_radius": self.acceptance_radius,
        }
        if self.frame is not None:
            d["origin"] = [self.frame.origin.lat, self.frame.origin.lon]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


LOG_COLUMNS = (
    "t", "x", "y", "heading", "water_speed", "gvx", "gvy", "wp_index",
    "target_x", "target_y", "inter_x", "inter_y",
    "wind_vx", "wind_vy", "cur_vx", "cur_vy",
)


@dataclass(eq=False)
class TrajectoryLog:
    """Columnar record of one mission run, one row per simulation tick.

    ``heading`` is stored in radians CCW from east; ``wp_index`` equals the
    number of waypoints on the final row of a completed run.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    water_speed: np.ndarray
    gvx: np.ndarray
    gvy: np.ndarray
    wp_index: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray
    inter_x: np.ndarray
    inter_y: np.ndarray
    wind_vx: np.ndarray
    wind_vy: np.ndarray
    cur_vx: np.ndarray
    cur_vy: np.ndarray
    timed_out: bool = False
    n_waypoints: Optional[int] = None

    def __post_init__(self) -> None:
        for name in LOG_COLUMNS:
            dtype = np.int64 if name == "wp_index" else float
            setattr(self, name, np.asarray(getattr(self, name), dtype=dtype))
        n = len(self.t)
        if n == 0:
            raise DataError("trajectory log is empty")
        if any(len(getattr(self, c)) != n for c in LOG_COLUMNS):
            raise DataError("trajectory log columns have unequal lengths")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise DataError("log time must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def positions(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def completed(self, mission: Mission) -> bool:
        return (not self.timed_out) and int(self.wp_index[-1]) == len(mission.waypoints)

    def cross_track(self, mission: Mission) -> np.ndarray:
        """Signed cross-track error of every row against its active leg."""
        n_wp = len(mission.waypoints)
        if int(self.wp_index.max()) > n_wp or int(self.wp_index.min()) < 0:
            raise DataError(
                f"log references waypoint {int(self.wp_index.max())} "
                f"but mission has {n_wp}"
            )
        out = np.zeros(len(self))
        for idx in np.unique(self.wp_index):
            a, b = mission.leg(int(idx))
            rows = self.wp_index == idx
            if distance(a, b) <= 1e-9:
                continue
            dx, dy = b.x - a.x, b.y - a.y
            out[rows] = (dx * (self.y[rows] - a.y) - dy * (self.x[rows] - a.x)) / math.hypot(dx, dy)
        return out

    def row_cross_track(self, i: int, mission: Mission) -> float:
        a, b = mission.leg(int(self.wp_index[i]))
        return cross_track(LocalPoint(self.x[i], self.y[i]), a, b)

    def equals(self, other: TrajectoryLog) -> bool:
        """Bit-for-bit equality of every column and flag."""
        if self.timed_out != other.timed_out or len(self) != len(other):
            return False
        return all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in LOG_COLUMNS
        )
