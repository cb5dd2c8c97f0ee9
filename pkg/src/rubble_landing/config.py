"""Flat ``key = value`` pipeline configuration and the two shipped presets."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .costmaps import CostmapWeights, EdgeParams, SteepnessParams
from .detection import DetectionParams
from .planner import PathParams
from .registry import ClusterParams
from .scenegen import NoiseModel

PRESETS = ("simulation", "real")


@dataclass(frozen=True)
class TrajectoryParams:
    v_nom: float = 0.5
    order: int = 3  # 3 minimises jerk, 4 snap
    min_segment_duration: float = 0.5
    approach_height: float = 1.0
    descent_clearance: float = 0.2
    sample_rate_hz: float = 20.0
    check_dt: float = 0.05
    v_max: float | None = None  # reported, not enforced
    a_max: float | None = None


@dataclass(frozen=True)
class GridParams:
    resolution: float = 0.5
    subsample: int = 4
    unknown_is_free: bool = True


@dataclass(frozen=True)
class CameraParams:
    width: int = 640
    height: int = 480
    fx: float = 320.0
    fy: float = 320.0


@dataclass(frozen=True)
class PipelineConfig:
    preset: str = "simulation"
    weights: CostmapWeights = field(default_factory=CostmapWeights)
    detection: DetectionParams = field(default_factory=DetectionParams)
    clustering: ClusterParams = field(default_factory=ClusterParams)
    steepness: SteepnessParams = field(default_factory=SteepnessParams)
    edges: EdgeParams = field(default_factory=EdgeParams)
    grid: GridParams = field(default_factory=GridParams)
    path: PathParams = field(default_factory=PathParams)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    noise: NoiseModel = field(default_factory=NoiseModel)
    camera: CameraParams = field(default_factory=CameraParams)
    d_min: float = 0.05
    d_max: float = 20.0
    cluster_every: int = 10
    selection_mode: str = "lowest_energy"


def _opt_float(s: str) -> float | None:
    return None if s.strip().lower() in ("none", "auto", "") else float(s)


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _order(s: str) -> int:
    names = {"jerk": 3, "snap": 4}
    return names[s.strip().lower()] if s.strip().lower() in names else int(s)


# key -> (section attribute or None for top level, field name, parser)
KEYS: dict[str, tuple[str | None, str, object]] = {
    "preset": (None, "preset", str),
    "weight_depth_accuracy": ("weights", "c1", float),
    "weight_flatness": ("weights", "c2", float),
    "weight_steepness": ("weights", "c3", float),
    "weight_energy": ("weights", "c4", float),
    "score_threshold": ("detection", "score_threshold", float),
    "uav_radius": ("detection", "uav_radius", float),
    "nms_radius_px": ("detection", "nms_radius", _opt_float),
    "footprint_margin_px": ("detection", "footprint_margin_px", float),
    "dedup_radius": ("clustering", "dedup_radius", float),
    "cluster_distance": ("clustering", "cluster_dist", float),
    "cluster_z_threshold": ("clustering", "z_threshold", float),
    "cluster_every": (None, "cluster_every", int),
    "theta_th_deg": ("steepness", "theta_th", lambda s: math.radians(float(s))),
    "normal_window": ("steepness", "window", int),
    "canny_low": ("edges", "low", float),
    "canny_high": ("edges", "high", float),
    "canny_sigma": ("edges", "sigma", float),
    "edge_min_span": ("edges", "min_span", float),
    "d_min": (None, "d_min", float),
    "d_max": (None, "d_max", float),
    "grid_resolution": ("grid", "resolution", float),
    "ray_subsample": ("grid", "subsample", int),
    "unknown_is_free": ("grid", "unknown_is_free", _bool),
    "rrt_step": ("path", "step", float),
    "rrt_goal_bias": ("path", "goal_bias", float),
    "rrt_max_iters": ("path", "max_iters", int),
    "rrt_rewire_radius": ("path", "rewire_radius", float),
    "clearance": ("path", "clearance", float),
    "rng_seed": ("path", "rng_seed", int),
    "v_nom": ("trajectory", "v_nom", float),
    "trajectory_order": ("trajectory", "order", _order),
    "min_segment_duration": ("trajectory", "min_segment_duration", float),
    "approach_height": ("trajectory", "approach_height", float),
    "descent_clearance": ("trajectory", "descent_clearance", float),
    "sample_rate_hz": ("trajectory", "sample_rate_hz", float),
    "v_max": ("trajectory", "v_max", _opt_float),
    "a_max": ("trajectory", "a_max", _opt_float),
    "selection_mode": (None, "selection_mode", str),
    "noise_coeff": ("noise", "coeff", float),
    "dropout": ("noise", "dropout", float),
    "image_width": ("camera", "width", int),
    "image_height": ("camera", "height", int),
    "focal_x_px": ("camera", "fx", float),
    "focal_y_px": ("camera", "fy", float),
}


def parse_flat(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    cp.optionxform = str
    cp.read_string("[config]\n" + text)
    return dict(cp["config"])


def apply_overrides(cfg: PipelineConfig, values: dict[str, str]) -> PipelineConfig:
    unknown = sorted(set(values) - set(KEYS))
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    top: dict = {}
    sections: dict[str, dict] = {}
    for key, raw in values.items():
        section, name, parse = KEYS[key]
        value = parse(raw)
        if section is None:
            top[name] = value
        else:
            sections.setdefault(section, {})[name] = value
    for section, changes in sections.items():
        top[section] = replace(getattr(cfg, section), **changes)
    out = replace(cfg, **top)
    if out.preset not in PRESETS:
        raise ValueError(f"preset must be one of {PRESETS}, got {out.preset!r}")
    return out


def load_preset(name: str) -> PipelineConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("rubble_landing.presets").joinpath(f"{name}.cfg").read_text()
    return apply_overrides(PipelineConfig(), parse_flat(text))


def load_config(path=None, preset: str | None = None) -> PipelineConfig:
    """Preset (from the file's ``preset`` key, the argument, or "simulation")
    with the file's remaining keys applied on top."""
    values = parse_flat(Path(path).read_text()) if path else {}
    name = preset or values.get("preset", "simulation")
    return apply_overrides(load_preset(name), {k: v for k, v in values.items() if k != "preset"})


def to_flat(cfg: PipelineConfig) -> str:
    lines = []
    for key, (section, name, _) in KEYS.items():
        obj = cfg if section is None else getattr(cfg, section)
        value = getattr(obj, name)
        if name == "theta_th":
            value = round(math.degrees(value), 12)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


__all__ = ["PipelineConfig", "TrajectoryParams", "GridParams", "CameraParams", "KEYS", "PRESETS",
           "parse_flat", "apply_overrides", "load_preset", "load_config", "to_flat"]
