"""Wind and current as queryable 2-D vector fields.

Two flavours of field live here: closed-form synthetic fields used as test
oracles, and Gaussian-process maps fitted to scattered measurements with a
Matern 3/2 kernel. A vector field is modelled as two independent scalar GPs
(east and north components) sharing one set of hyperparameters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Protocol, Sequence

import numpy as np
from scipy import linalg

from .geo import DomainError, LocalPoint

MAX_FORCE_MPS = 60.0
MAX_TRAINING_POINTS = 2000
SQRT3 = math.sqrt(3.0)

GRID_HEADER = ["x_m", "y_m", "vx_mps", "vy_mps", "varx", "vary"]


class FitError(RuntimeError):
    """The GP could not be fitted (usually an ill-conditioned kernel matrix)."""


class Source(str, Enum):
    WIND = "wind"
    CURRENT = "current"


@dataclass(frozen=True)
class ForceSample:
    position: LocalPoint
    vector: tuple[float, float]
    source: Source
    time: float = 0.0

    def __post_init__(self) -> None:
        vx, vy = self.vector
        if not (math.isfinite(vx) and math.isfinite(vy)):
            raise DomainError("non-finite force vector")
        if math.hypot(vx, vy) > MAX_FORCE_MPS:
            raise DomainError(f"force magnitude above {MAX_FORCE_MPS} m/s")
        object.__setattr__(self, "source", Source(self.source))


@dataclass(frozen=True)
class GpHyperparams:
    signal_std: float
    length_scale: float
    noise_std: float

    def __post_init__(self) -> None:
        for name in ("signal_std", "length_scale", "noise_std"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be finite and > 0, got {v!r}")
        if not 1.0 <= self.length_scale <= 1e5:
            raise DomainError(f"length_scale {self.length_scale} outside [1, 1e5] m")


class ForceField(Protocol):
    def query(self, p: LocalPoint) -> tuple[float, float]: ...


# ---------------------------------------------------------------------------
# synthetic fields


@dataclass(frozen=True)
class UniformField:
    v: tuple[float, float] = (0.0, 0.0)

    def query(self, p: LocalPoint) -> tuple[float, float]:
        return self.v


@dataclass(frozen=True)
class ShearField:
    """Field whose ``axis`` component grows linearly across that axis.

    For ``axis="x"`` the returned vector is ``base + (rate * y, 0)``; for
    ``axis="y"`` it is ``base + (0, rate * x)``.
    """

    axis: str = "x"
    rate: float = 0.0
    base: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.axis not in ("x", "y"):
            raise DomainError(f"shear axis must be 'x' or 'y', got {self.axis!r}")

    def query(self, p: LocalPoint) -> tuple[float, float]:
        bx, by = self.base
        if self.axis == "x":
            return bx + self.rate * p.y, by
        return bx, by + self.rate * p.x


@dataclass(frozen=True)
class VortexField:
    """Counter-clockwise tangential field with magnitude strength / r.

    Inside unit radius the magnitude is held at ``strength``.
    """

    center: LocalPoint = LocalPoint(0.0, 0.0)
    strength: float = 1.0

    def query(self, p: LocalPoint) -> tuple[float, float]:
        dx, dy = p.x - self.center.x, p.y - self.center.y
        r = math.hypot(dx, dy)
        if r == 0.0:
            return 0.0, 0.0
        mag = self.strength if r < 1.0 else self.strength / r
        return -mag * dy / r, mag * dx / r


def synthetic_field(kind: str, **params) -> ForceField:
    """Build a synthetic field by name: ``uniform``, ``shear`` or ``vortex``."""
    for v in params.values():
        vals = v if isinstance(v, (tuple, list, LocalPoint)) else [v]
        for x in vals:
            if isinstance(x, (int, float)) and not math.isfinite(x):
                raise DomainError("synthetic field parameters must be finite")
    if kind == "uniform":
        return UniformField(tuple(params.get("v", (0.0, 0.0))))
    if kind == "shear":
        return ShearField(params.get("axis", "x"), params.get("rate", 0.0),
                          tuple(params.get("base", (0.0, 0.0))))
    if kind == "vortex":
        c = params.get("center", LocalPoint(0.0, 0.0))
        if not isinstance(c, LocalPoint):
            c = LocalPoint(*c)
        return VortexField(c, params.get("strength", 1.0))
    raise DomainError(f"unknown synthetic field kind {kind!r}")


# ---------------------------------------------------------------------------
# Gaussian process maps


def matern32(r, h: GpHyperparams):
    """Matern nu=3/2 covariance ``s^2 (1 + sqrt3 r/l) exp(-sqrt3 r/l)``.

    Accepts a scalar or an array of distances.
    """
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("kernel distance must be >= 0")
    z = SQRT3 * r_arr / h.length_scale
    k = h.signal_std**2 * (1.0 + z) * np.exp(-z)
    return float(k) if k.ndim == 0 else k


def _points_array(points: Sequence[LocalPoint]) -> np.ndarray:
    return np.array([[p.x, p.y] for p in points], dtype=float).reshape(-1, 2)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _factor(x: np.ndarray, h: GpHyperparams):
    k = matern32(_pairwise(x, x), h)
    k[np.diag_indices_from(k)] += h.noise_std**2
    try:
        return linalg.cho_factor(k, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise FitError(
            "kernel matrix is not positive definite; increase noise_std"
        ) from exc


@dataclass(frozen=True, eq=False)
class GpForceMap:
    """Fitted GP posterior for one force source.

    ``weights`` holds the dual coefficients ``(K + s_n^2 I)^-1 y`` with one
    column per vector component.
    """

    hyper: GpHyperparams
    training_points: tuple[LocalPoint, ...]
    targets: np.ndarray
    chol: tuple[np.ndarray, bool]
    weights: np.ndarray
    source: Source = Source.CURRENT

    @property
    def _x(self) -> np.ndarray:
        return _points_array(self.training_points)

    def predict_many(self, xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean (n, 2) and per-component variance (n, 2)."""
        xq = np.asarray(xq, dtype=float).reshape(-1, 2)
        ks = matern32(_pairwise(xq, self._x), self.hyper)
        mean = ks @ self.weights
        v = linalg.cho_solve(self.chol, ks.T, check_finite=False)
        var = self.hyper.signal_std**2 - np.einsum("ij,ji->i", ks, v)
        var = np.maximum(var, 0.0)
        return mean, np.column_stack([var, var])

    def query(self, p: LocalPoint) -> tuple[float, float]:
        (vx, vy), _ = predict(self, p)
        return vx, vy


def fit_gp(samples: Sequence[ForceSample], h: GpHyperparams) -> GpForceMap:
    if not samples:
        raise FitError("cannot fit a GP to zero samples")
    if len(samples) > MAX_TRAINING_POINTS:
        raise FitError(f"{len(samples)} samples exceeds the {MAX_TRAINING_POINTS} cap")
    sources = {s.source for s in samples}
    if len(sources) != 1:
        raise FitError("samples mix wind and current; fit one map per source")
    points = tuple(s.position for s in samples)
    x = _points_array(points)
    y = np.array([s.vector for s in samples], dtype=float)
    chol = _factor(x, h)
    weights = linalg.cho_solve(chol, y, check_finite=False)
    return GpForceMap(h, points, y, chol, weights, sources.pop())


def predict(m: GpForceMap, p: LocalPoint) -> tuple[tuple[float, float], tuple[float, float]]:
    mean, var = m.predict_many(np.array([[p.x, p.y]]))
    return (float(mean[0, 0]), float(mean[0, 1])), (float(var[0, 0]), float(var[0, 1]))


def log_marginal_likelihood(samples: Sequence[ForceSample], h: GpHyperparams) -> float:
    """Sum of the vx and vy log marginal likelihoods."""
    x = _points_array([s.position for s in samples])
    y = np.array([s.vector for s in samples], dtype=float)
    c, lower = _factor(x, h)
    alpha = linalg.cho_solve((c, lower), y, check_finite=False)
    n = len(samples)
    logdet = 2.0 * np.sum(np.log(np.diag(c)))
    total = 0.0
    for j in range(2):
        total += -0.5 * y[:, j] @ alpha[:, j] - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)
    return float(total)


def fit_hyperparams(samples: Sequence[ForceSample], grid: Sequence[GpHyperparams]) -> GpHyperparams:
    """Grid-search the candidate maximising the summed log marginal likelihood.

    Ties go to the smaller length scale, then to the earlier grid entry.
    """
    if not grid:
        raise FitError("empty hyperparameter grid")
    if len(samples) < 3:
        raise FitError("need at least 3 samples to select hyperparameters")
    best = None
    for i, h in enumerate(grid):
        try:
            lml = log_marginal_likelihood(samples, h)
        except FitError:
            continue
        key = (-lml, h.length_scale, i)
        if best is None or key < best[0]:
            best = (key, h)
    if best is None:
        raise FitError("every grid candidate failed to factorise; increase noise_std")
    return best[1]


def default_hyperparams(samples: Sequence[ForceSample]) -> GpHyperparams:
    """Data-driven defaults for when the caller supplies no hyperparameters."""
    y = np.array([s.vector for s in samples], dtype=float)
    x = _points_array([s.position for s in samples])
    signal = float(np.std(y)) if len(samples) > 1 else 0.0
    if not signal > 1e-6:
        signal = max(float(np.max(np.abs(y))), 0.1)
    diag = float(np.hypot(*(x.max(axis=0) - x.min(axis=0))))
    length = min(max(diag / 4.0, 1.0), 1e5)
    return GpHyperparams(signal, length, 0.1 * signal)


def speed_direction(vx: float, vy: float) -> tuple[float, float]:
    """Speed (m/s) and direction of travel (radians CCW from east)."""
    return math.hypot(vx, vy), math.atan2(vy, vx)


def export_grid(m: GpForceMap, path, xs: Iterable[float], ys: Iterable[float]) -> None:
    """Write a raster of posterior mean and variance to CSV."""
    xs, ys = list(xs), list(ys)
    pts = np.array([[x, y] for y in ys for x in xs], dtype=float)
    mean, var = m.predict_many(pts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_HEADER)
        for (x, y), (vx, vy), (a, b) in zip(pts, mean, var):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(vx)),
                        repr(float(vy)), repr(float(a)), repr(float(b))])


def grid_axes(m: GpForceMap, step: float, margin: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    x = m._x
    lo, hi = x.min(axis=0) - margin, x.max(axis=0) + margin
    xs = lo[0] + step * np.arange(int(math.floor((hi[0] - lo[0]) / step)) + 1)
    ys = lo[1] + step * np.arange(int(math.floor((hi[1] - lo[1]) / step)) + 1)
    return xs, ys
