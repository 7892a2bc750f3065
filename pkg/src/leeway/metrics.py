"""Path-following metrics and baseline-versus-augmented comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .geo import DomainError
from .mission import DataError, Mission, TrajectoryLog

DEFAULT_THRESHOLD_M = 1.0
METRIC_NAMES = ("max_cross_track", "mean_abs_cross_track", "pct_over_threshold", "path_length")


class ComparisonError(ValueError):
    """The two runs were not flown on the same mission."""


@dataclass(frozen=True)
class PathMetrics:
    max_cross_track: float
    mean_abs_cross_track: float
    pct_over_threshold: float
    threshold: float
    path_length: float
    completion: bool
    mission_digest: Optional[str] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.pct_over_threshold <= 1.0:
            raise DomainError("pct_over_threshold must lie in [0, 1]")
        if self.mean_abs_cross_track < 0 or self.max_cross_track < self.mean_abs_cross_track - 1e-12:
            raise DomainError("need max >= mean >= 0")

    def as_dict(self) -> dict:
        return asdict(self)


def compute_metrics(log: TrajectoryLog, mission: Mission,
                    threshold: float = DEFAULT_THRESHOLD_M) -> PathMetrics:
    """Cross-track statistics of ``log`` against the legs of ``mission``.

    A sample counts as off-track when ``|cte| > threshold`` (strictly).
    """
    if not (math.isfinite(threshold) and threshold >= 0):
        raise DomainError("threshold must be finite and >= 0")
    if log.n_waypoints is not None and log.n_waypoints != len(mission.waypoints):
        raise DataError(
            f"log was recorded against {log.n_waypoints} waypoints, mission has "
            f"{len(mission.waypoints)}"
        )
    cte = np.abs(log.cross_track(mission))
    steps = np.hypot(np.diff(log.x), np.diff(log.y))
    return PathMetrics(
        max_cross_track=float(cte.max()),
        mean_abs_cross_track=float(cte.mean()),
        pct_over_threshold=float(np.count_nonzero(cte > threshold)) / len(cte),
        threshold=float(threshold),
        path_length=float(steps.sum()),
        completion=log.completed(mission),
        mission_digest=mission.digest(),
    )


Reduction = Union[float, str]


@dataclass(frozen=True)
class Improvement:
    """Relative reduction ``(a - b) / a`` per metric; "n/a" for a zero baseline."""

    reductions: dict
    baseline: PathMetrics
    augmented: PathMetrics

    def lines(self) -> list[str]:
        out = []
        for name in METRIC_NAMES:
            a, b = getattr(self.baseline, name), getattr(self.augmented, name)
            r = self.reductions[name]
            shown = "n/a" if r == "n/a" else f"{100.0 * r:.1f}%"
            out.append(f"{name}: baseline={a:.6g} augmented={b:.6g} reduction={shown}")
        out.append(f"completion: baseline={self.baseline.completion} "
                   f"augmented={self.augmented.completion}")
        return out


def _reduction(a: float, b: float) -> Reduction:
    if a == 0.0:
        return "n/a"
    return (a - b) / a


def compare_runs(a: PathMetrics, b: PathMetrics) -> Improvement:
    if a.mission_digest != b.mission_digest:
        raise ComparisonError("runs were flown on different missions")
    if a.threshold != b.threshold:
        raise ComparisonError("runs were scored with different thresholds")
    red = {n: _reduction(getattr(a, n), getattr(b, n)) for n in METRIC_NAMES}
    return Improvement(red, a, b)
