"""On-disk formats: missions, regions, trajectory logs, sensor logs, GP maps.

Everything structured is JSON; tabular data is CSV with fixed headers. File
headings are compass degrees (clockwise from north); relative sensor bearings
are degrees clockwise from the bow, giving the direction the measured flow
points. Internally all angles are radians counter-clockwise from east.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .augment import AugmentConfig
from .coverage import CoveragePlan, LakeRegion, RiverCorridor
from .displacement import RelativeReading, relative_to_absolute
from .forcefield import ForceSample, GpForceMap, GpHyperparams, Source, fit_gp
from .geo import (
    DomainError,
    Frame,
    GeoPoint,
    LocalPoint,
    Pose,
    compass_to_math,
    from_local,
    math_to_compass,
    to_local,
)
from .mission import DataError, Mission, TrajectoryLog, Waypoint

log = logging.getLogger(__name__)

PathLike = Union[str, Path]

MISSION_FORMAT = "leeway-mission/v1"
REGION_FORMAT = "leeway-region/v1"
MAP_FORMAT = "leeway-gpmap/v1"
LOG_META_FORMAT = "leeway-log/v1"

LOG_HEADER = [
    "t_s", "x_m", "y_m", "heading_deg_compass", "water_speed_mps", "gvx_mps", "gvy_mps",
    "wp_index", "target_x_m", "target_y_m", "intermediate_x_m", "intermediate_y_m",
    "wind_vx", "wind_vy", "cur_vx", "cur_vy",
]
SENSOR_HEADER = [
    "t_s", "lat_deg", "lon_deg", "heading_deg_compass", "sog_mps", "wind_speed_mps",
    "wind_bearing_rel_deg", "water_speed_mps", "water_bearing_rel_deg",
]
MAX_SKIPPED_FRACTION = 0.10


class ParseError(ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, path: Optional[PathLike] = None,
                 line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.line = line


def _fmt(v: float) -> str:
    # repr round-trips exactly and is stable across runs
    return repr(float(v))


def _read_json(path: PathLike, fmt: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", path)
    if doc.get("format") != fmt:
        raise ParseError(f"expected format {fmt!r}, got {doc.get('format')!r}", path)
    return doc


def _write_json(path: PathLike, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _need(doc: dict, key: str, path: PathLike):
    if key not in doc:
        raise ParseError(f"missing key {key!r}", path)
    return doc[key]


# ---------------------------------------------------------------------------
# points in either coordinate system


def _frame_of(doc: dict, path: PathLike) -> Optional[Frame]:
    o = doc.get("origin")
    if o is None:
        return None
    return Frame(GeoPoint(float(_need(o, "lat_deg", path)), float(_need(o, "lon_deg", path))))


class _PointReader:
    """Parses point objects, enforcing one coordinate system per file."""

    def __init__(self, frame: Optional[Frame], path: PathLike):
        self.frame = frame
        self.path = path
        self.kind: Optional[str] = None

    def __call__(self, obj) -> LocalPoint:
        if isinstance(obj, (list, tuple)):
            kind, vals = "xy", obj
            if len(vals) != 2:
                raise ParseError("point arrays must be [x, y]", self.path)
        elif isinstance(obj, dict) and "x_m" in obj and "y_m" in obj:
            kind, vals = "xy", (obj["x_m"], obj["y_m"])
        elif isinstance(obj, dict) and "lat_deg" in obj and "lon_deg" in obj:
            kind, vals = "latlon", (obj["lat_deg"], obj["lon_deg"])
        else:
            raise ParseError(f"cannot read point from {obj!r}", self.path)
        if self.kind is None:
            self.kind = kind
        elif kind != self.kind:
            raise ParseError("file mixes x/y and lat/lon coordinates", self.path)
        a, b = float(vals[0]), float(vals[1])
        if kind == "xy":
            return LocalPoint(a, b)
        if self.frame is None:
            raise ParseError("lat/lon coordinates need an origin", self.path)
        return to_local(self.frame, GeoPoint(a, b))


def _point_out(p: LocalPoint, frame: Optional[Frame], coordinates: str) -> dict:
    if coordinates == "latlon":
        g = from_local(frame, p)
        return {"lat_deg": g.lat, "lon_deg": g.lon}
    return {"x_m": p.x, "y_m": p.y}


# ---------------------------------------------------------------------------
# augmentation config block


def augment_config_from_dict(d: dict) -> AugmentConfig:
    base = AugmentConfig()
    return AugmentConfig(
        gain=float(d.get("gain", base.gain)),
        replan_period=float(d.get("replan_period_s", base.replan_period)),
        speed_beta=float(d.get("speed_beta", base.speed_beta)),
        speed_bounds=(float(d.get("speed_min_mps", base.speed_bounds[0])),
                      float(d.get("speed_max_mps", base.speed_bounds[1]))),
        max_offset=float(d.get("max_offset_m", base.max_offset)),
        source=d.get("source", base.source.value),
        horizon=d.get("horizon", base.horizon.value),
        window=float(d.get("window_s", base.window)),
        k_wind=float(d.get("k_wind", base.k_wind)),
        median_filter=bool(d.get("median_filter", base.median_filter)),
        significance=float(d.get("significance", base.significance)),
    )


def augment_config_to_dict(c: AugmentConfig) -> dict:
    return {
        "gain": c.gain, "replan_period_s": c.replan_period, "speed_beta": c.speed_beta,
        "speed_min_mps": c.speed_bounds[0], "speed_max_mps": c.speed_bounds[1],
        "max_offset_m": c.max_offset, "source": c.source.value, "horizon": c.horizon.value,
        "window_s": c.window, "k_wind": c.k_wind, "median_filter": c.median_filter,
        "significance": c.significance,
    }


# ---------------------------------------------------------------------------
# missions


@dataclass
class MissionFile:
    missions: list[Mission]
    frame: Optional[Frame] = None
    metadata: dict = field(default_factory=dict)
    augment: Optional[AugmentConfig] = None


def load_missions(path: PathLike) -> MissionFile:
    doc = _read_json(path, MISSION_FORMAT)
    frame = _frame_of(doc, path)
    read = _PointReader(frame, path)
    radius = float(doc.get("acceptance_radius_m", 3.0))
    robots = _need(doc, "robots", path)
    if not isinstance(robots, list) or not robots:
        raise ParseError("'robots' must be a non-empty list", path)
    missions = []
    for r in robots:
        start = read(_need(r, "start", path))
        wps = []
        for w in _need(r, "waypoints", path):
            wps.append(Waypoint(read(w), float(_need(w, "speed_mps", path))))
        if not wps:
            raise ParseError("robot has no waypoints", path)
        missions.append(Mission(start, tuple(wps), radius, frame, dict(r.get("metadata", {}))))
    aug = doc.get("augment")
    return MissionFile(missions, frame, dict(doc.get("metadata", {})),
                       augment_config_from_dict(aug) if aug is not None else None)


def save_missions(path: PathLike, missions: Sequence[Mission], frame: Optional[Frame] = None,
                  metadata: Optional[dict] = None, coordinates: str = "xy",
                  augment: Optional[AugmentConfig] = None) -> None:
    if coordinates not in ("xy", "latlon"):
        raise DomainError("coordinates must be 'xy' or 'latlon'")
    if coordinates == "latlon" and frame is None:
        raise DomainError("lat/lon output needs a frame origin")
    if not missions:
        raise DomainError("no missions to write")
    radii = {m.acceptance_radius for m in missions}
    if len(radii) != 1:
        raise DomainError("all robots in one file share an acceptance radius")
    doc: dict = {
        "format": MISSION_FORMAT,
        "coordinates": coordinates,
        "acceptance_radius_m": radii.pop(),
        "metadata": metadata or {},
        "robots": [],
    }
    if frame is not None:
        doc["origin"] = {"lat_deg": frame.origin.lat, "lon_deg": frame.origin.lon}
    for m in missions:
        wps = []
        for w in m.waypoints:
            d = _point_out(w.position, frame, coordinates)
            d["speed_mps"] = w.speed
            wps.append(d)
        doc["robots"].append({
            "start": _point_out(m.start, frame, coordinates),
            "waypoints": wps,
            "metadata": m.metadata,
        })
    if augment is not None:
        doc["augment"] = augment_config_to_dict(augment)
    _write_json(path, doc)


def save_plan(path: PathLike, plan: CoveragePlan, frame: Optional[Frame] = None,
              acceptance_radius: float = 3.0) -> None:
    meta = {"pattern": plan.pattern, "spacing_m": plan.lane_spacing,
            "warnings": list(plan.warnings), **_jsonable(plan.metadata)}
    save_missions(path, plan.to_missions(acceptance_radius), frame, meta)


def _jsonable(d: dict) -> dict:
    return json.loads(json.dumps(d, default=lambda o: list(o) if isinstance(o, tuple) else str(o)))


# ---------------------------------------------------------------------------
# regions


@dataclass
class RegionFile:
    region: Union[LakeRegion, RiverCorridor]
    frame: Optional[Frame] = None
    starts: list[LocalPoint] = field(default_factory=list)
    center: Optional[LocalPoint] = None


def load_region(path: PathLike) -> RegionFile:
    doc = _read_json(path, REGION_FORMAT)
    frame = _frame_of(doc, path)
    read = _PointReader(frame, path)
    kind = _need(doc, "type", path)
    if kind == "lake":
        region = LakeRegion(tuple(read(p) for p in _need(doc, "boundary", path)))
    elif kind == "river":
        region = RiverCorridor(tuple(read(p) for p in _need(doc, "centerline", path)),
                               float(_need(doc, "width_m", path)))
    else:
        raise ParseError(f"region type must be 'lake' or 'river', got {kind!r}", path)
    starts = [read(p) for p in doc.get("starts", [])]
    center = read(doc["center"]) if "center" in doc else None
    return RegionFile(region, frame, starts, center)


def save_region(path: PathLike, rf: RegionFile) -> None:
    doc: dict = {"format": REGION_FORMAT}
    r = rf.region
    if isinstance(r, LakeRegion):
        doc.update(type="lake", boundary=[[p.x, p.y] for p in r.boundary])
    else:
        doc.update(type="river", centerline=[[p.x, p.y] for p in r.centerline], width_m=r.width)
    if rf.frame is not None:
        doc["origin"] = {"lat_deg": rf.frame.origin.lat, "lon_deg": rf.frame.origin.lon}
    if rf.starts:
        doc["starts"] = [[p.x, p.y] for p in rf.starts]
    if rf.center is not None:
        doc["center"] = [rf.center.x, rf.center.y]
    _write_json(path, doc)


# ---------------------------------------------------------------------------
# trajectory logs


def meta_path(path: PathLike) -> Path:
    return Path(str(path) + ".meta.json")


def save_log(path: PathLike, tl: TrajectoryLog, metadata: Optional[dict] = None) -> None:
    """Write the log CSV plus a ``.meta.json`` sidecar with run provenance."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for i in range(len(tl)):
            w.writerow([
                _fmt(tl.t[i]), _fmt(tl.x[i]), _fmt(tl.y[i]),
                _fmt(math_to_compass(float(tl.heading[i]))),
                _fmt(tl.water_speed[i]), _fmt(tl.gvx[i]), _fmt(tl.gvy[i]),
                str(int(tl.wp_index[i])),
                _fmt(tl.target_x[i]), _fmt(tl.target_y[i]),
                _fmt(tl.inter_x[i]), _fmt(tl.inter_y[i]),
                _fmt(tl.wind_vx[i]), _fmt(tl.wind_vy[i]),
                _fmt(tl.cur_vx[i]), _fmt(tl.cur_vy[i]),
            ])
    meta = {"format": LOG_META_FORMAT, "timed_out": tl.timed_out,
            "n_waypoints": tl.n_waypoints, **(metadata or {})}
    _write_json(meta_path(path), meta)


def load_log_metadata(path: PathLike) -> Optional[dict]:
    mp = meta_path(path)
    if not mp.exists():
        return None
    return _read_json(mp, LOG_META_FORMAT)


def _check_header(header: Optional[list], expected: Sequence[str], path: PathLike) -> None:
    if header is None:
        raise ParseError("missing header", path, 1)
    for i, name in enumerate(expected):
        if i >= len(header):
            raise ParseError(f"missing column {name!r}", path, 1)
        if header[i].strip() != name:
            raise ParseError(f"column {i + 1} is {header[i]!r}, expected {name!r}", path, 1)
    if len(header) > len(expected):
        raise ParseError(f"unexpected extra column {header[len(expected)]!r}", path, 1)


def load_log(path: PathLike) -> TrajectoryLog:
    cols: list[list[float]] = [[] for _ in LOG_HEADER]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), LOG_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(LOG_HEADER):
                raise ParseError(f"expected {len(LOG_HEADER)} fields, got {len(row)}", path, lineno)
            try:
                vals = [float(v) for v in row]
            except ValueError as e:
                raise ParseError(str(e), path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", path, lineno)
            for c, v in zip(cols, vals):
                c.append(v)
    if not cols[0]:
        raise ParseError("log has no rows", path)
    cols[3] = [compass_to_math(v) for v in cols[3]]
    meta = load_log_metadata(path) or {}
    try:
        return TrajectoryLog(*(np.array(c) for c in cols[:7]),
                             np.array(cols[7]).astype(np.int64),
                             *(np.array(c) for c in cols[8:]),
                             timed_out=bool(meta.get("timed_out", False)),
                             n_waypoints=meta.get("n_waypoints"))
    except DataError as e:
        raise ParseError(str(e), path) from None


def save_geojson(path: PathLike, logs: Sequence[TrajectoryLog], frame: Frame,
                 names: Optional[Sequence[str]] = None) -> None:
    """Trajectories as GeoJSON LineStrings in lon/lat, for plotting."""
    feats = []
    for i, tl in enumerate(logs):
        coords = []
        for x, y in zip(tl.x, tl.y):
            g = from_local(frame, LocalPoint(float(x), float(y)))
            coords.append([g.lon, g.lat])
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": {"name": names[i] if names else f"run{i}",
                           "timed_out": tl.timed_out},
        })
    with open(path, "w") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh)
        fh.write("\n")


# ---------------------------------------------------------------------------
# recorded sensor logs


@dataclass
class SensorLog:
    """Parsed field recording.

    ``poses`` and ``ground_vel`` are aligned with ``times``; ``wind`` and
    ``current`` hold one reading per kept row.
    """

    frame: Frame
    times: list[float]
    poses: list[Pose]
    ground_vel: list[tuple[float, float]]
    wind: list[RelativeReading]
    current: list[RelativeReading]
    skipped: int = 0

    def force_samples(self, source: Source) -> list[ForceSample]:
        """World-frame samples of one source, ready for GP fitting."""
        source = Source(source)
        readings = self.wind if source is Source.WIND else self.current
        return [ForceSample(p.position, relative_to_absolute(r, p, v), source, r.time)
                for r, p, v in zip(readings, self.poses, self.ground_vel)]


def _ground_velocity(xy: np.ndarray, sog: np.ndarray, heading: np.ndarray) -> np.ndarray:
    """Velocity with magnitude ``sog`` along the track's course over ground.

    Course comes from central differences of position; where the track does
    not move the heading is used instead.
    """
    n = len(xy)
    if n >= 2:
        d = np.gradient(xy, axis=0)
    else:
        d = np.zeros((n, 2))
    out = np.empty((n, 2))
    for i in range(n):
        if math.hypot(*d[i]) > 1e-9:
            cog = math.atan2(d[i, 1], d[i, 0])
        else:
            cog = heading[i]
        out[i] = sog[i] * math.cos(cog), sog[i] * math.sin(cog)
    return out


def load_sensor_log(path: PathLike, frame: Optional[Frame] = None) -> SensorLog:
    """Parse a recorded CSV of GPS, heading, anemometer and paddle-wheel data.

    Rows with non-finite fields are skipped and counted; more than 10%
    skipped rows is an error. Without ``frame`` the first kept fix is the
    origin.
    """
    rows: list[list[float]] = []
    lines: list[int] = []
    skipped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        _check_header(next(reader, None), SENSOR_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SENSOR_HEADER):
                raise ParseError(f"expected {len(SENSOR_HEADER)} fields, got {len(row)}",
                                 path, lineno)
            try:
                vals = [float(v) for v in row]
            except ValueError as e:
                raise ParseError(str(e), path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                skipped += 1
                log.warning("%s:%d: non-finite field, row skipped", path, lineno)
                continue
            rows.append(vals)
            lines.append(lineno)
    total = len(rows) + skipped
    if total == 0:
        raise ParseError("sensor log has no rows", path)
    if skipped > MAX_SKIPPED_FRACTION * total:
        raise ParseError(f"{skipped} of {total} rows skipped (more than 10%)", path)
    if skipped:
        log.warning("%s: skipped %d row(s) with non-finite fields", path, skipped)
    a = np.array(rows)
    if len(a) > 1 and not np.all(np.diff(a[:, 0]) > 0):
        bad = int(np.flatnonzero(np.diff(a[:, 0]) <= 0)[0]) + 1
        raise ParseError("time must be strictly increasing", path, lines[bad])
    if frame is None:
        try:
            frame = Frame(GeoPoint(a[0, 1], a[0, 2]))
        except DomainError as e:
            raise ParseError(str(e), path, lines[0]) from None
    xy = np.empty((len(a), 2))
    headings = np.empty(len(a))
    for i, r in enumerate(a):
        try:
            p = to_local(frame, GeoPoint(r[1], r[2]))
            if r[4] < 0 or r[5] < 0 or r[7] < 0:
                raise DomainError("speeds must be >= 0")
        except DomainError as e:
            raise ParseError(str(e), path, lines[i]) from None
        xy[i] = p.x, p.y
        headings[i] = compass_to_math(r[3])
    gv = _ground_velocity(xy, a[:, 4], headings)
    poses, wind, cur, gvs = [], [], [], []
    for i, r in enumerate(a):
        t = float(r[0])
        poses.append(Pose(LocalPoint(*xy[i]), headings[i]))
        gvs.append((float(gv[i, 0]), float(gv[i, 1])))
        # relative bearings are clockwise in the file
        wind.append(RelativeReading(r[5], -math.radians(r[6]), Source.WIND, t))
        cur.append(RelativeReading(r[7], -math.radians(r[8]), Source.CURRENT, t))
    return SensorLog(frame, [float(t) for t in a[:, 0]], poses, gvs, wind, cur, skipped)


# ---------------------------------------------------------------------------
# GP maps


def save_map(path: PathLike, m: GpForceMap) -> None:
    """Persist hyperparameters and training data; loading refits exactly."""
    doc = {
        "format": MAP_FORMAT,
        "source": m.source.value,
        "hyper": {"signal_std": m.hyper.signal_std, "length_scale_m": m.hyper.length_scale,
                  "noise_std": m.hyper.noise_std},
        "points": [[p.x, p.y] for p in m.training_points],
        "targets": [[float(a), float(b)] for a, b in m.targets],
    }
    _write_json(path, doc)


def load_map(path: PathLike) -> GpForceMap:
    doc = _read_json(path, MAP_FORMAT)
    h = _need(doc, "hyper", path)
    hyper = GpHyperparams(float(_need(h, "signal_std", path)),
                          float(_need(h, "length_scale_m", path)),
                          float(_need(h, "noise_std", path)))
    source = Source(_need(doc, "source", path))
    pts, tgt = _need(doc, "points", path), _need(doc, "targets", path)
    if len(pts) != len(tgt):
        raise ParseError("points and targets differ in length", path)
    samples = [ForceSample(LocalPoint(*p), (float(t[0]), float(t[1])), source)
               for p, t in zip(pts, tgt)]
    return fit_gp(samples, hyper)
