"""Shipped experiment scenarios: the star A/B comparison and the overshoot run.

Both are fully deterministic: field samples for the GP maps are drawn from a
seeded generator, everything else is closed-form simulation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .augment import AugmentConfig, AugmenterState, ForceSource, Horizon
from .coverage import star_pattern
from .displacement import DisplacementModel, build_training_set, fit_linear
from .forcefield import (
    ForceField,
    ForceSample,
    GpForceMap,
    GpHyperparams,
    Source,
    UniformField,
    fit_gp,
    fit_hyperparams,
)
from .geo import LocalPoint
from .mission import Mission, TrajectoryLog
from .vessel import PidGains, VesselParams, run_mission

STAR_RADIUS_M = 200.0
STAR_SPEED = 3.0
CURRENT_MPS = 1.0
TRAINING_SPEEDS = (2.0, 2.5, 3.0, 3.5)
SAMPLE_COUNT = 200
SAMPLE_NOISE = 0.1
DEFAULT_SEED = 7

# augmentation tuned for the star scenario; see README
STAR_AUGMENT = AugmentConfig(
    gain=1.0, replan_period=1.0, speed_beta=0.0, max_offset=100.0,
    source=ForceSource.MAP, horizon=Horizon.LEG, significance=2.0,
)


def sample_field(f: ForceField, source: Source, n: int, half_extent: float,
                 noise: float, rng: np.random.Generator) -> list[ForceSample]:
    """``n`` noisy point measurements of ``f`` scattered over a square."""
    pts = rng.uniform(-half_extent, half_extent, size=(n, 2))
    eps = rng.normal(0.0, noise, size=(n, 2))
    out = []
    for (x, y), (ex, ey) in zip(pts, eps):
        p = LocalPoint(float(x), float(y))
        vx, vy = f.query(p)
        out.append(ForceSample(p, (vx + float(ex), vy + float(ey)), source))
    return out


def hyper_grid(noise: float = SAMPLE_NOISE) -> list[GpHyperparams]:
    return [GpHyperparams(s, l, noise)
            for s in (0.25, 0.5, 1.0, 2.0)
            for l in (50.0, 100.0, 200.0, 400.0, 800.0, 1600.0)]


def fit_map(samples: list[ForceSample], noise: float = SAMPLE_NOISE) -> GpForceMap:
    h = fit_hyperparams(samples, hyper_grid(noise))
    return fit_gp(samples, h)


def train_model(field_wind: ForceField, field_current: ForceField,
                params: VesselParams = VesselParams(), gains: PidGains = PidGains(),
                radius: float = STAR_RADIUS_M, dt: float = 0.1) -> DisplacementModel:
    """Fit the displacement model on PID-only one-way legs in the given fields.

    Legs are flown at several speeds so the speed and bias columns are
    identifiable.
    """
    samples = []
    for v in TRAINING_SPEEDS:
        for m in star_pattern(LocalPoint(0.0, 0.0), radius, v):
            leg = Mission(m.start, m.waypoints[:1], m.acceptance_radius)
            log = run_mission(leg, gains, params, field_wind, field_current, dt)
            samples.extend(build_training_set(log, leg, k_wind=params.k_wind))
    return fit_linear(samples)


@dataclass
class HeadingResult:
    heading_deg: float
    mission: Mission
    baseline: TrajectoryLog
    augmented: TrajectoryLog


@dataclass
class StarResult:
    model: DisplacementModel
    maps: tuple[GpForceMap, GpForceMap]
    runs: list[HeadingResult] = field(default_factory=list)


def star_ab(seed: int = DEFAULT_SEED, current: float = CURRENT_MPS,
            config: AugmentConfig = STAR_AUGMENT,
            params: VesselParams = VesselParams(), gains: PidGains = PidGains(),
            dt: float = 0.1, model: Optional[DisplacementModel] = None,
            headings_deg: Optional[Sequence[float]] = None) -> StarResult:
    """PID-only versus augmented runs on the eight star headings.

    The vessel flies in a uniform ``current`` m/s eastward current and calm
    air. The augmenter reads forces from GP maps fitted to noisy samples of
    both fields.
    """
    wind_f = UniformField((0.0, 0.0))
    cur_f = UniformField((current, 0.0))
    rng = np.random.default_rng(seed)
    extent = 1.25 * STAR_RADIUS_M
    maps = (
        fit_map(sample_field(wind_f, Source.WIND, SAMPLE_COUNT, extent, SAMPLE_NOISE, rng)),
        fit_map(sample_field(cur_f, Source.CURRENT, SAMPLE_COUNT, extent, SAMPLE_NOISE, rng)),
    )
    if model is None:
        model = train_model(wind_f, cur_f, params, gains, STAR_RADIUS_M, dt)
    out = StarResult(model, maps)
    for m in star_pattern(LocalPoint(0.0, 0.0), STAR_RADIUS_M, STAR_SPEED,
                          headings_deg=headings_deg):
        base = run_mission(m, gains, params, wind_f, cur_f, dt)
        aug = AugmenterState(model, config, maps, m.acceptance_radius)
        augd = run_mission(m, gains, params, wind_f, cur_f, dt, augmenter=aug)
        out.runs.append(HeadingResult(m.metadata["heading_deg"], m, base, augd))
    return out


OVERSHOOT_CURRENT_MPS = 1.2
OVERSHOOT_HEADING_DEG = 90.0


def overshoot(config: AugmentConfig = STAR_AUGMENT, seed: int = DEFAULT_SEED,
              dt: float = 0.1) -> HeadingResult:
    """Out-and-back leg flown across a strong current (40% of vessel speed).

    Without augmentation the integral term winds up on the outbound leg and
    the vessel swings back and forth across the return track.
    """
    res = star_ab(seed, OVERSHOOT_CURRENT_MPS, config, dt=dt,
                  headings_deg=[OVERSHOOT_HEADING_DEG])
    return res.runs[0]
