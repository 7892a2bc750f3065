"""Run configuration: vessel, navigator gains, augmentation and environment."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .augment import AugmentConfig
from .displacement import DisplacementModel, load_model
from .fileio import (
    ParseError,
    PathLike,
    augment_config_from_dict,
    augment_config_to_dict,
    load_map,
)
from .forcefield import ForceField, GpForceMap, synthetic_field
from .geo import DomainError
from .vessel import DEFAULT_DT, LoopGains, PidGains, VesselParams

CONFIG_FORMAT = "leeway-config/v1"


@dataclass(frozen=True)
class FieldSpec:
    """Environment field: a synthetic field by name, or a fitted GP map file."""

    kind: str = "uniform"
    params: dict = field(default_factory=dict)
    path: Optional[Path] = None

    def build(self) -> ForceField:
        if self.kind == "map":
            return load_map(self.path)
        return synthetic_field(self.kind, **self.params)

    def as_dict(self) -> dict:
        if self.kind == "map":
            return {"type": "map", "path": str(self.path)}
        return {"type": self.kind, **self.params}


@dataclass(frozen=True)
class RunConfig:
    vessel: VesselParams = VesselParams()
    gains: PidGains = PidGains()
    augment: AugmentConfig = AugmentConfig()
    wind: FieldSpec = FieldSpec()
    current: FieldSpec = FieldSpec()
    dt: float = DEFAULT_DT
    seed: int = 0
    sensor_noise: float = 0.0
    model_path: Optional[Path] = None
    wind_map_path: Optional[Path] = None
    current_map_path: Optional[Path] = None
    outputs: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 < self.dt <= 1:
            raise DomainError(f"dt must be in (0, 1], got {self.dt}")
        if self.sensor_noise < 0:
            raise DomainError("sensor_noise_mps must be >= 0")
        self.augment.check_vessel(self.vessel.max_speed)

    def model(self) -> Optional[DisplacementModel]:
        return load_model(self.model_path) if self.model_path is not None else None

    def maps(self) -> Optional[tuple[GpForceMap, GpForceMap]]:
        if self.wind_map_path is None or self.current_map_path is None:
            return None
        return load_map(self.wind_map_path), load_map(self.current_map_path)

    def as_dict(self) -> dict:
        v, g = self.vessel, self.gains
        d = {
            "format": CONFIG_FORMAT,
            "dt_s": self.dt,
            "seed": self.seed,
            "sensor_noise_mps": self.sensor_noise,
            "vessel": {"max_speed_mps": v.max_speed, "max_accel_mps2": v.max_accel,
                       "max_turn_rate_rps": v.max_turn_rate, "k_wind": v.k_wind,
                       "k_current": v.k_current},
            "gains": {
                "heading": {"kp": g.heading.kp, "ki": g.heading.ki, "kd": g.heading.kd},
                "speed": {"kp": g.speed.kp, "ki": g.speed.ki, "kd": g.speed.kd},
                "integral_limit": g.integral_limit,
            },
            "augment": augment_config_to_dict(self.augment),
            "wind": self.wind.as_dict(),
            "current": self.current.as_dict(),
            "outputs": self.outputs,
        }
        for key, p in (("model", self.model_path), ("wind_map", self.wind_map_path),
                       ("current_map", self.current_map_path)):
            if p is not None:
                d[key] = str(p)
        return d


def _resolve(base: Path, p: Optional[str], path: PathLike, what: str) -> Optional[Path]:
    if p is None:
        return None
    full = (base / p) if not Path(p).is_absolute() else Path(p)
    if not full.exists():
        raise ParseError(f"{what} file {p!r} does not exist", path)
    return full


def _field_spec(d: dict, base: Path, path: PathLike) -> FieldSpec:
    d = dict(d)
    kind = d.pop("type", "uniform")
    if kind == "map":
        return FieldSpec("map", {}, _resolve(base, d.get("path"), path, "field map"))
    if kind not in ("uniform", "shear", "vortex"):
        raise ParseError(f"unknown field type {kind!r}", path)
    return FieldSpec(kind, d)


def _loop(d: dict, default: LoopGains) -> LoopGains:
    return LoopGains(float(d.get("kp", default.kp)), float(d.get("ki", default.ki)),
                     float(d.get("kd", default.kd)))


def load_config(path: PathLike) -> RunConfig:
    """Read a run configuration; relative file references resolve next to it."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    if not isinstance(doc, dict) or doc.get("format") != CONFIG_FORMAT:
        raise ParseError(f"expected format {CONFIG_FORMAT!r}", path)
    base = Path(path).parent
    vd, gd = doc.get("vessel", {}), doc.get("gains", {})
    dv, dg = VesselParams(), PidGains()
    vessel = VesselParams(
        float(vd.get("max_speed_mps", dv.max_speed)), float(vd.get("max_accel_mps2", dv.max_accel)),
        float(vd.get("max_turn_rate_rps", dv.max_turn_rate)), float(vd.get("k_wind", dv.k_wind)),
        float(vd.get("k_current", dv.k_current)),
    )
    gains = PidGains(_loop(gd.get("heading", {}), dg.heading), _loop(gd.get("speed", {}), dg.speed),
                     float(gd.get("integral_limit", dg.integral_limit)))
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ParseError("seed must be an integer", path)
    return RunConfig(
        vessel=vessel,
        gains=gains,
        augment=augment_config_from_dict(doc.get("augment", {})),
        wind=_field_spec(doc.get("wind", {"type": "uniform"}), base, path),
        current=_field_spec(doc.get("current", {"type": "uniform"}), base, path),
        dt=float(doc.get("dt_s", DEFAULT_DT)),
        seed=seed,
        sensor_noise=float(doc.get("sensor_noise_mps", 0.0)),
        model_path=_resolve(base, doc.get("model"), path, "model"),
        wind_map_path=_resolve(base, doc.get("wind_map"), path, "wind map"),
        current_map_path=_resolve(base, doc.get("current_map"), path, "current map"),
        outputs=dict(doc.get("outputs", {})),
    )


def save_config(path: PathLike, cfg: RunConfig) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
