"""Command-line interface.

Exit status: 0 success, 1 domain/parse/data error, 2 usage error. Errors go
to stderr as ``error[CODE]: message``. Set ``LEEWAY_LOG_LEVEL`` (e.g. DEBUG)
for diagnostics.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .augment import AugmenterState, EstimationError
from .config import FieldSpec, RunConfig, load_config, save_config
from .coverage import (
    boustrophedon,
    l_cover,
    LakeRegion,
    partition_area,
    split_path,
    star_pattern,
    t_cover,
    z_cover,
)
from .displacement import (
    SCHEMA_COMBINED,
    SCHEMA_SEPARATE,
    ModelFitError,
    build_training_set,
    fit_linear,
    save_model,
)
from .fileio import (
    ParseError,
    load_log,
    load_log_metadata,
    load_missions,
    load_region,
    load_sensor_log,
    save_geojson,
    save_log,
    save_map,
    save_missions,
    save_plan,
)
from .forcefield import (
    FitError,
    GpHyperparams,
    default_hyperparams,
    export_grid,
    fit_gp,
    fit_hyperparams,
    grid_axes,
)
from .geo import DomainError, LocalPoint, compass_to_math
from .metrics import ComparisonError, compare_runs, compute_metrics
from .mission import DataError, Mission
from .scenarios import CURRENT_MPS, OVERSHOOT_CURRENT_MPS, STAR_AUGMENT, star_ab
from .vessel import run_mission

log = logging.getLogger("leeway")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _robot(missions: Sequence[Mission], i: int) -> Mission:
    if not 0 <= i < len(missions):
        raise UsageError(f"--robot {i} out of range; file has {len(missions)} robot(s)")
    return missions[i]


# ---------------------------------------------------------------------------
# subcommands


def cmd_fit_field(a) -> int:
    sl = load_sensor_log(a.log)
    samples = sl.force_samples(a.source)
    if a.signal_std is not None:
        h = GpHyperparams(a.signal_std, a.length_scale, a.noise_std)
    else:
        base = default_hyperparams(samples)
        grid = [GpHyperparams(base.signal_std * s, min(max(base.length_scale * l, 1.0), 1e5),
                              base.noise_std)
                for s in (0.5, 1.0, 2.0) for l in (0.25, 0.5, 1.0, 2.0)]
        h = fit_hyperparams(samples, grid) if len(samples) >= 3 else base
    m = fit_gp(samples, h)
    save_map(a.out, m)
    grid_out = a.grid or str(a.out) + ".grid.csv"
    xs, ys = grid_axes(m, a.grid_step)
    export_grid(m, grid_out, xs, ys)
    print(f"samples: {len(samples)}")
    print(f"skipped_rows: {sl.skipped}")
    print(f"signal_std: {h.signal_std:.6g}")
    print(f"length_scale_m: {h.length_scale:.6g}")
    print(f"noise_std: {h.noise_std:.6g}")
    print(f"map: {a.out}")
    print(f"grid: {grid_out}")
    return 0


def cmd_train_model(a) -> int:
    mission = _robot(load_missions(a.mission).missions, a.robot)
    tl = load_log(a.trajectory)
    samples = build_training_set(tl, mission, a.window, a.k_wind)
    schema = SCHEMA_SEPARATE if a.schema == "separate" else SCHEMA_COMBINED
    model = fit_linear(samples, schema)
    save_model(model, a.out)
    print(f"samples: {len(samples)}")
    print(f"fit_residual_m: {model.fit_residual:.6g}")
    return 0


def cmd_plan(a) -> int:
    rf = load_region(a.region)
    region = rf.region
    if a.pattern == "star":
        if rf.center is not None:
            center = rf.center
        elif isinstance(region, LakeRegion):
            c = region.polygon.centroid
            center = LocalPoint(c.x, c.y)
        else:
            center = region.station(region.length / 2.0)[0]
        missions = star_pattern(center, a.radius, a.speed)
        save_missions(a.out, missions, rf.frame, {"pattern": "star", "radius_m": a.radius})
        print(f"missions: {len(missions)}")
        return 0
    if a.spacing is None:
        raise UsageError(f"--spacing is required for pattern {a.pattern}")
    if a.pattern == "boustrophedon":
        if not isinstance(region, LakeRegion):
            raise DomainError("boustrophedon needs a lake region")
        orient = compass_to_math(a.orientation)
        if a.robots > 1 and len(rf.starts) == a.robots:
            plan = partition_area(region, a.robots, rf.starts, a.spacing, orient, a.speed)
        else:
            plan = boustrophedon(region, a.spacing, orient, a.speed)
            if a.robots > 1:
                plan = split_path(plan, a.robots)
    else:
        if isinstance(region, LakeRegion):
            raise DomainError(f"pattern {a.pattern} needs a river region")
        gen = {"l": l_cover, "t": t_cover, "z": z_cover}[a.pattern]
        plan = gen(region, a.spacing, a.speed)
        if a.robots > 1:
            plan = split_path(plan, a.robots)
    save_plan(a.out, plan, rf.frame)
    for w in plan.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"robots: {len(plan.robots)}")
    print(f"lanes: {len(plan.all_lanes())}")
    print(f"turns: {plan.turn_count()}")
    return 0


def simulate(mission: Mission, cfg: RunConfig, augment: bool):
    aug = None
    if augment:
        model = cfg.model()
        if model is None:
            raise DomainError("--augment needs a 'model' entry in the config")
        aug = AugmenterState(model, cfg.augment, cfg.maps(), mission.acceptance_radius)
    rng = np.random.default_rng(cfg.seed)
    return run_mission(mission, cfg.gains, cfg.vessel, cfg.wind.build(), cfg.current.build(),
                       cfg.dt, aug, sensor_noise=cfg.sensor_noise, rng=rng)


def cmd_simulate(a) -> int:
    mf = load_missions(a.mission)
    mission = _robot(mf.missions, a.robot)
    cfg = load_config(a.config)
    tl = simulate(mission, cfg, a.augment)
    save_log(a.out, tl, {"mission_digest": mission.digest(), "augmented": bool(a.augment),
                         "dt_s": cfg.dt, "seed": cfg.seed, "robot": a.robot})
    if a.geojson:
        if mf.frame is None:
            raise DomainError("GeoJSON export needs a mission file with an origin")
        save_geojson(a.geojson, [tl], mf.frame, ["augmented" if a.augment else "baseline"])
    print(f"samples: {len(tl)}")
    print(f"completed: {str(tl.completed(mission)).lower()}")
    print(f"timed_out: {str(tl.timed_out).lower()}")
    return 0


def _print_metrics(m) -> None:
    print(f"max_cross_track_m: {m.max_cross_track:.6f}")
    print(f"mean_abs_cross_track_m: {m.mean_abs_cross_track:.6f}")
    print(f"pct_over_threshold: {m.pct_over_threshold:.6f}")
    print(f"threshold_m: {m.threshold:g}")
    print(f"path_length_m: {m.path_length:.6f}")
    print(f"completion: {str(m.completion).lower()}")


def _check_provenance(path, mission: Mission) -> None:
    meta = load_log_metadata(path)
    if meta is None or "mission_digest" not in meta:
        log.warning("%s has no provenance metadata; mission match not verified", path)
        return
    if meta["mission_digest"] != mission.digest():
        raise ComparisonError(f"{path} was recorded on a different mission")


def cmd_metrics(a) -> int:
    mission = _robot(load_missions(a.mission).missions, a.robot)
    _check_provenance(a.log, mission)
    _print_metrics(compute_metrics(load_log(a.log), mission, a.threshold))
    return 0


def cmd_compare(a) -> int:
    mission = _robot(load_missions(a.mission).missions, a.robot)
    for p in (a.baseline, a.augmented):
        _check_provenance(p, mission)
    mb = compute_metrics(load_log(a.baseline), mission, a.threshold)
    ma = compute_metrics(load_log(a.augmented), mission, a.threshold)
    for line in compare_runs(mb, ma).lines():
        print(line)
    return 0


def cmd_scenario(a) -> int:
    """Write the shipped star A/B scenario to a directory, ready for the other commands."""
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    current = OVERSHOOT_CURRENT_MPS if a.name == "overshoot" else CURRENT_MPS
    res = star_ab(a.seed, current, STAR_AUGMENT)
    save_map(out / "wind_map.json", res.maps[0])
    save_map(out / "current_map.json", res.maps[1])
    save_model(res.model, out / "model.json")
    missions = [r.mission for r in res.runs]
    save_missions(out / "missions.json", missions, metadata={"pattern": "star", "scenario": a.name})
    cfg = RunConfig(augment=STAR_AUGMENT, current=FieldSpec("uniform", {"v": [current, 0.0]}),
                    seed=a.seed, model_path=Path("model.json"),
                    wind_map_path=Path("wind_map.json"), current_map_path=Path("current_map.json"))
    save_config(out / "config.json", cfg)
    reductions = []
    for i, r in enumerate(res.runs):
        meta = {"mission_digest": r.mission.digest(), "dt_s": cfg.dt, "seed": a.seed, "robot": i}
        save_log(out / f"baseline_{i}.csv", r.baseline, {**meta, "augmented": False})
        save_log(out / f"augmented_{i}.csv", r.augmented, {**meta, "augmented": True})
        mb = compute_metrics(r.baseline, r.mission)
        ma = compute_metrics(r.augmented, r.mission)
        rep = compare_runs(mb, ma)
        red = rep.reductions["max_cross_track"]
        reductions.append(red)
        print(f"robot {i} heading {r.heading_deg:g}: max {mb.max_cross_track:.3f} -> "
              f"{ma.max_cross_track:.3f} m, pct>1m {mb.pct_over_threshold:.3f} -> "
              f"{ma.pct_over_threshold:.3f}")
    print(f"mean_max_cross_track_reduction: {100.0 * float(np.mean(reductions)):.1f}%")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leeway", description="Force-aware waypoint augmentation toolkit.")
    p.add_argument("--version", action="version", version=f"leeway {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("fit-field", help="fit a GP force map to a sensor log")
    s.add_argument("--log", required=True)
    s.add_argument("--source", required=True, choices=["wind", "current"])
    s.add_argument("--out", required=True)
    s.add_argument("--grid", help="grid CSV path (default: <out>.grid.csv)")
    s.add_argument("--grid-step", type=float, default=10.0)
    s.add_argument("--signal-std", type=float)
    s.add_argument("--length-scale", type=float)
    s.add_argument("--noise-std", type=float)
    s.set_defaults(func=cmd_fit_field)

    s = sub.add_parser("train-model", help="fit the displacement model to a PID-only log")
    s.add_argument("--trajectory", required=True)
    s.add_argument("--mission", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--robot", type=int, default=0)
    s.add_argument("--window", type=float, default=5.0)
    s.add_argument("--k-wind", type=float, default=0.05)
    s.add_argument("--schema", choices=["combined", "separate"], default="combined")
    s.set_defaults(func=cmd_train_model)

    s = sub.add_parser("plan", help="generate coverage missions")
    s.add_argument("--pattern", required=True, choices=["boustrophedon", "l", "t", "z", "star"])
    s.add_argument("--region", required=True)
    s.add_argument("--spacing", type=float)
    s.add_argument("--robots", type=int, default=1)
    s.add_argument("--orientation", type=float, default=90.0,
                   help="lane direction, compass degrees (default 90: east-west lanes)")
    s.add_argument("--speed", type=float, default=3.0)
    s.add_argument("--radius", type=float, default=100.0, help="star leg length, meters")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_plan)

    s = sub.add_parser("simulate", help="fly a mission in the simulator")
    s.add_argument("--mission", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--augment", action="store_true")
    s.add_argument("--robot", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--geojson")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("metrics", help="cross-track metrics of a log")
    s.add_argument("--log", required=True)
    s.add_argument("--mission", required=True)
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--robot", type=int, default=0)
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("compare", help="baseline versus augmented improvement report")
    s.add_argument("--baseline", required=True)
    s.add_argument("--augmented", required=True)
    s.add_argument("--mission", required=True)
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--robot", type=int, default=0)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("scenario", help="write a shipped A/B scenario to a directory")
    s.add_argument("--name", choices=["star", "overshoot"], default="star")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_scenario)
    return p


ERROR_CODES = (
    (ParseError, "E_PARSE"),
    (ComparisonError, "E_COMPARE"),
    (DataError, "E_DATA"),
    (DomainError, "E_DOMAIN"),
    (FitError, "E_FIT"),
    (ModelFitError, "E_FIT"),
    (EstimationError, "E_ESTIMATE"),
    (OSError, "E_IO"),
    (ValueError, "E_PARSE"),
    (KeyError, "E_PARSE"),
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("LEEWAY_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"error[E_USAGE]: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        for cls, code in ERROR_CODES:
            if isinstance(e, cls):
                print(f"error[{code}]: {e}", file=sys.stderr)
                return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
