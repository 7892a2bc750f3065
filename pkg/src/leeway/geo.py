"""Local planar frames, projections and small geometry helpers.

All internal math runs in a local east/north frame measured in meters, with
headings in radians counter-clockwise from east. File formats use compass
degrees (clockwise from north); :func:`compass_to_math` and
:func:`math_to_compass` convert between the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

EARTH_RADIUS_M = 6371008.8
MAX_LOCAL_MAGNITUDE_M = 1e7


class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.lat) or not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"lat out of range: {self.lat!r}")
        if not math.isfinite(self.lon) or not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"lon out of range: {self.lon!r}")


@dataclass(frozen=True)
class LocalPoint:
    """Point in meters east (``x``) and north (``y``) of a frame origin."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite local point: ({self.x!r}, {self.y!r})")
        if math.hypot(self.x, self.y) >= MAX_LOCAL_MAGNITUDE_M:
            raise DomainError("local point beyond projection validity (1e7 m)")

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y

    def __add__(self, other: LocalPoint) -> LocalPoint:
        return LocalPoint(self.x + other.x, self.y + other.y)

    def __sub__(self, other: LocalPoint) -> LocalPoint:
        return LocalPoint(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> LocalPoint:
        return LocalPoint(self.x * k, self.y * k)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class Frame:
    origin: GeoPoint
    earth_radius: float = EARTH_RADIUS_M


@dataclass(frozen=True)
class Pose:
    position: LocalPoint
    heading: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.heading):
            raise DomainError(f"non-finite heading: {self.heading!r}")
        object.__setattr__(self, "heading", normalize_angle(self.heading))


def normalize_angle(theta: float) -> float:
    """Wrap ``theta`` into ``(-pi, pi]``."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def compass_to_math(deg: float) -> float:
    return normalize_angle(math.pi / 2.0 - math.radians(deg))


def math_to_compass(theta: float) -> float:
    deg = math.degrees(math.pi / 2.0 - theta) % 360.0
    # -0.0 % 360 and round-off just below 360 both belong at 0
    return 0.0 if deg >= 360.0 or deg == 0.0 else deg


def to_local(frame: Frame, p: GeoPoint) -> LocalPoint:
    """Equirectangular projection of ``p`` about the frame origin.

    Only valid for small survey areas; points more than one degree away from
    the origin in either coordinate are rejected.
    """
    o = frame.origin
    if abs(p.lat - o.lat) >= 1.0:
        raise DomainError(f"lat {p.lat} more than 1 degree from origin {o.lat}")
    dlon = p.lon - o.lon
    if abs(dlon) >= 1.0:
        raise DomainError(f"lon {p.lon} more than 1 degree from origin {o.lon}")
    r = frame.earth_radius
    x = r * math.cos(math.radians(o.lat)) * math.radians(dlon)
    y = r * math.radians(p.lat - o.lat)
    return LocalPoint(x, y)


def from_local(frame: Frame, p: LocalPoint) -> GeoPoint:
    o = frame.origin
    if not (math.isfinite(p.x) and math.isfinite(p.y)):
        raise DomainError("non-finite local point")
    r = frame.earth_radius
    lat = o.lat + math.degrees(p.y / r)
    lon = o.lon + math.degrees(p.x / (r * math.cos(math.radians(o.lat))))
    return GeoPoint(lat, lon)


def cross_track(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> float:
    """Signed distance of ``p`` from the line through ``a`` and ``b``.

    Positive when ``p`` lies to the left of the direction of travel a -> b.
    """
    dx, dy = b.x - a.x, b.y - a.y
    length = math.hypot(dx, dy)
    if length <= 1e-9:
        raise DomainError("degenerate segment: a and b coincide")
    return (dx * (p.y - a.y) - dy * (p.x - a.x)) / length


def along_track(p: LocalPoint, a: LocalPoint, b: LocalPoint) -> float:
    dx, dy = b.x - a.x, b.y - a.y
    length = math.hypot(dx, dy)
    if length <= 1e-9:
        raise DomainError("degenerate segment: a and b coincide")
    return (dx * (p.x - a.x) + dy * (p.y - a.y)) / length


def bearing(a: LocalPoint, b: LocalPoint) -> float:
    return math.atan2(b.y - a.y, b.x - a.x)


def distance(a: LocalPoint, b: LocalPoint) -> float:
    return math.hypot(b.x - a.x, b.y - a.y)


def rotate(vx: float, vy: float, theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return c * vx - s * vy, s * vx + c * vy


def to_path_frame(vx: float, vy: float, course: float) -> tuple[float, float]:
    """World vector -> (along, cross) components for a path heading ``course``."""
    return rotate(vx, vy, -course)


def from_path_frame(along: float, cross: float, course: float) -> tuple[float, float]:
    return rotate(along, cross, course)
