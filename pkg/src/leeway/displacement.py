"""Linear prediction of how wind and current displace the vessel.

Readings from the hull-mounted anemometer and paddle wheel arrive relative
to the moving boat; :func:`relative_to_absolute` turns them into world-frame
vectors. Executed trajectories are cut into fixed windows, each yielding
force features in the path frame of the leg and the along/cross displacement
the vessel accumulated during the window. A least-squares fit maps one to the
other.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .forcefield import Source
from .geo import DomainError, LocalPoint, Pose, bearing, normalize_angle, rotate, to_path_frame
from .mission import Mission, TrajectoryLog

DEFAULT_WINDOW_S = 5.0
DEFAULT_K_WIND = 0.05
# windows that start mid-turn measure manoeuvring, not drift
DEFAULT_MAX_HEADING_ERROR = math.pi / 4
DEFAULT_MAX_SPEED_CHANGE = 0.5

SCHEMA_COMBINED = "leeway-displacement/combined-v1"
SCHEMA_SEPARATE = "leeway-displacement/separate-v1"
FEATURE_NAMES = {
    SCHEMA_COMBINED: ("f_along", "f_cross", "v_cmd", "bias"),
    SCHEMA_SEPARATE: ("wind_along", "wind_cross", "cur_along", "cur_cross", "v_cmd", "bias"),
}
TRAINING_HEADER = ["f_along", "f_cross", "v_cmd", "e_along", "e_cross"]


class ModelFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class RelativeReading:
    """One hull-relative sensor sample.

    ``bearing_rel`` is the direction the measured flow points, relative to
    the bow (0 = dead ahead, CCW positive). For the paddle wheel the flow is
    the hull's own motion through the water.
    """

    speed: float
    bearing_rel: float
    source: Source
    time: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.speed) and self.speed >= 0.0):
            raise DomainError(f"reading speed must be >= 0, got {self.speed!r}")
        object.__setattr__(self, "source", Source(self.source))


@dataclass(frozen=True)
class FeatureVector:
    f_along: float
    f_cross: float
    v_cmd: float
    bias: float = 1.0
    wind_along: float = 0.0
    wind_cross: float = 0.0
    cur_along: float = 0.0
    cur_cross: float = 0.0

    def as_array(self, schema: str = SCHEMA_COMBINED) -> np.ndarray:
        if schema == SCHEMA_COMBINED:
            return np.array([self.f_along, self.f_cross, self.v_cmd, self.bias])
        if schema == SCHEMA_SEPARATE:
            return np.array([self.wind_along, self.wind_cross, self.cur_along,
                             self.cur_cross, self.v_cmd, self.bias])
        raise DomainError(f"unknown feature schema {schema!r}")


@dataclass(frozen=True)
class DisplacementSample:
    features: FeatureVector
    error: tuple[float, float]


@dataclass(frozen=True, eq=False)
class DisplacementModel:
    """``weights`` is 2 x n_features: rows give (e_along, e_cross)."""

    weights: np.ndarray
    fit_residual: float = 0.0
    schema: str = SCHEMA_COMBINED

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        n = len(FEATURE_NAMES[self.schema])
        if w.shape != (2, n):
            raise DomainError(f"weights must be 2x{n} for {self.schema}, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise DomainError("non-finite model weights")
        if not self.fit_residual >= 0:
            raise DomainError("fit_residual must be >= 0")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zero(cls, schema: str = SCHEMA_COMBINED) -> DisplacementModel:
        return cls(np.zeros((2, len(FEATURE_NAMES[schema]))), 0.0, schema)

    def is_zero(self) -> bool:
        return not np.any(self.weights)


def combine_forces(wind: tuple[float, float], current: tuple[float, float],
                   k_wind: float = DEFAULT_K_WIND) -> tuple[float, float]:
    return k_wind * wind[0] + current[0], k_wind * wind[1] + current[1]


def make_features(wind: tuple[float, float], current: tuple[float, float],
                  course: float, v_cmd: float,
                  k_wind: float = DEFAULT_K_WIND) -> FeatureVector:
    """Express world-frame forces in the path frame of a leg heading ``course``."""
    fa, fc = to_path_frame(*combine_forces(wind, current, k_wind), course)
    wa, wc = to_path_frame(*wind, course)
    ca, cc = to_path_frame(*current, course)
    return FeatureVector(fa, fc, v_cmd, 1.0, wa, wc, ca, cc)


def relative_to_absolute(r: RelativeReading, pose: Pose,
                         ground_vel: tuple[float, float]) -> tuple[float, float]:
    """World-frame true wind or current from a hull-relative reading."""
    vx, vy = rotate(r.speed, 0.0, pose.heading + r.bearing_rel)
    if r.source is Source.WIND:
        # apparent = true - boat velocity
        return vx + ground_vel[0], vy + ground_vel[1]
    # paddle wheel measures hull velocity through the water
    return ground_vel[0] - vx, ground_vel[1] - vy


def absolute_to_relative(vec: tuple[float, float], source: Source, pose: Pose,
                         ground_vel: tuple[float, float], time: float = 0.0) -> RelativeReading:
    """Inverse of :func:`relative_to_absolute`: what the hull sensor would read."""
    source = Source(source)
    if source is Source.WIND:
        fx, fy = vec[0] - ground_vel[0], vec[1] - ground_vel[1]
    else:
        fx, fy = ground_vel[0] - vec[0], ground_vel[1] - vec[1]
    speed = math.hypot(fx, fy)
    rel = normalize_angle(math.atan2(fy, fx) - pose.heading) if speed > 0 else 0.0
    return RelativeReading(speed, rel, source, time)


def build_training_set(log: TrajectoryLog, mission: Mission,
                       window: float = DEFAULT_WINDOW_S, k_wind: float = DEFAULT_K_WIND,
                       max_heading_error: float = DEFAULT_MAX_HEADING_ERROR,
                       max_speed_change: float = DEFAULT_MAX_SPEED_CHANGE,
                       ) -> list[DisplacementSample]:
    """Cut a log into per-leg windows of ``window`` seconds.

    Each sample averages the sensed forces over the window, projected into
    the path frame of the active leg. Its error is the end position minus
    where straight travel toward the waypoint at the commanded speed would
    have put the vessel, in the same frame.
    Windows that do not fit entirely inside one leg are dropped, as are
    windows starting with the bow more than ``max_heading_error`` off course,
    and windows over which the hull speed through water changes by more than
    ``max_speed_change`` (spin-up from rest is not a force response).
    """
    if len(log) == 0:
        return []
    n_wp = len(mission.waypoints)
    samples = []
    idx = log.wp_index
    # contiguous runs of a single active leg
    breaks = np.flatnonzero(np.diff(idx)) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [len(log)]])
    for s, e in zip(starts, ends):
        leg = int(idx[s])
        if leg >= n_wp:
            continue
        wp = mission.waypoints[leg]
        a, b = mission.leg(leg)
        leg_len = math.hypot(b.x - a.x, b.y - a.y)
        t = log.t[s:e]
        t0 = t[0]
        k = 0
        while True:
            lo = t0 + k * window
            hi = lo + window
            if hi > t[-1] + 1e-9:
                break
            i0 = s + int(np.searchsorted(t, lo - 1e-9))
            i1 = s + int(np.searchsorted(t, hi - 1e-9))
            k += 1
            if i1 >= e or i1 <= i0:
                break
            p0 = LocalPoint(log.x[i0], log.y[i0])
            if math.hypot(wp.position.x - p0.x, wp.position.y - p0.y) <= 1e-9:
                continue
            aim = bearing(p0, wp.position)
            course = bearing(a, b) if leg_len > 1e-9 else aim
            if abs(normalize_angle(log.heading[i0] - course)) > max_heading_error:
                continue
            if abs(log.water_speed[i1] - log.water_speed[i0]) > max_speed_change:
                continue
            sl = slice(i0, i1)
            wind = (float(np.mean(log.wind_vx[sl])), float(np.mean(log.wind_vy[sl])))
            cur = (float(np.mean(log.cur_vx[sl])), float(np.mean(log.cur_vy[sl])))
            dt = log.t[i1] - log.t[i0]
            dx = log.x[i1] - p0.x - wp.speed * dt * math.cos(aim)
            dy = log.y[i1] - p0.y - wp.speed * dt * math.sin(aim)
            feats = make_features(wind, cur, course, wp.speed, k_wind)
            samples.append(DisplacementSample(feats, to_path_frame(dx, dy, course)))
    return samples


def fit_linear(samples: Sequence[DisplacementSample],
               schema: str = SCHEMA_COMBINED) -> DisplacementModel:
    """Least-squares weights via a QR factorisation of the feature matrix."""
    names = FEATURE_NAMES[schema]
    if len(samples) < len(names):
        raise ModelFitError(f"need at least {len(names)} samples, got {len(samples)}")
    x = np.array([s.features.as_array(schema) for s in samples])
    y = np.array([s.error for s in samples], dtype=float)
    # near-zero columns first: without pivoting QR would blame a later column
    norms = np.linalg.norm(x, axis=0)
    tol = max(x.shape) * np.finfo(float).eps * 1e3
    bad = [names[i] for i in np.flatnonzero(norms <= tol * max(norms.max(), 1.0))]
    if not bad:
        _, rn = np.linalg.qr(x / norms)
        bad = [names[i] for i in np.flatnonzero(np.abs(np.diag(rn)) <= tol)]
    if bad:
        raise ModelFitError(f"rank-deficient features; degenerate columns: {', '.join(bad)}")
    q, r = np.linalg.qr(x)
    w = solve_triangular(r, q.T @ y).T
    resid = x @ w.T - y
    rms = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    return DisplacementModel(w, rms, schema)


def predict_displacement(model: DisplacementModel, f: FeatureVector) -> tuple[float, float]:
    e = model.weights @ f.as_array(model.schema)
    return float(e[0]), float(e[1])


def save_training_set(samples: Sequence[DisplacementSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAINING_HEADER)
        for s in samples:
            f = s.features
            w.writerow([repr(float(v)) for v in (f.f_along, f.f_cross, f.v_cmd, *s.error)])


def load_training_set(path) -> list[DisplacementSample]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRAINING_HEADER:
            raise DomainError(f"training set header must be {','.join(TRAINING_HEADER)}")
        out = []
        for row in reader:
            fa, fc, v, ea, ec = map(float, row)
            out.append(DisplacementSample(FeatureVector(fa, fc, v), (ea, ec)))
    return out


def save_model(model: DisplacementModel, path) -> None:
    doc = {
        "schema": model.schema,
        "features": list(FEATURE_NAMES[model.schema]),
        "weights": [[float(v) for v in row] for row in model.weights],
        "fit_residual_m": float(model.fit_residual),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> DisplacementModel:
    with open(path) as fh:
        doc = json.load(fh)
    schema = doc.get("schema")
    if schema not in FEATURE_NAMES:
        raise DomainError(f"unsupported model schema {schema!r}")
    return DisplacementModel(np.array(doc["weights"], dtype=float),
                             float(doc["fit_residual_m"]), schema)


def latest(readings: Sequence[RelativeReading], source: Source,
           median_of: int = 1) -> Optional[RelativeReading]:
    """Most recent reading of ``source``; optionally a median of the last few."""
    matching = [r for r in readings if r.source is Source(source)]
    if not matching:
        return None
    if median_of <= 1 or len(matching) == 1:
        return matching[-1]
    tail = matching[-median_of:]
    # median over vectors component-wise, expressed back as speed/bearing
    vx = float(np.median([r.speed * math.cos(r.bearing_rel) for r in tail]))
    vy = float(np.median([r.speed * math.sin(r.bearing_rel) for r in tail]))
    return RelativeReading(math.hypot(vx, vy), math.atan2(vy, vx), tail[-1].source, tail[-1].time)
