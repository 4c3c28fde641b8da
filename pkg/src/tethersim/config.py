"""Scenario files: JSON parsing into dataclasses and whole-config validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from pydantic import ConfigDict, TypeAdapter, ValidationError

from .control.pid import TRACKING_GAINS, WINCH_GAINS, PidGains
from .mission import MissionConfig, mission_config_violations
from .world import Terrain, add_box

STRICT = ConfigDict(extra="forbid")
for _cls in (MissionConfig, PidGains):
    _cls.__pydantic_config__ = STRICT

TETHER_MODULE_MASS = 0.8
HEAD_MASS = 0.15
ATTACH_AREA_MM = (350.0, 350.0)
MAX_PAYLOAD = 3.5  # heaviest payload the UGV carries, kg


class ConfigError(ValueError):
    """Unparseable scenario file; the message names the line or field."""


@dataclass
class BoxSpec:
    __pydantic_config__ = STRICT
    center: tuple[float, float]
    size: tuple[float, float]
    height: float


@dataclass
class EnclosureSpec:
    """Walled room whose doorway is the hidden-space entry."""

    __pydantic_config__ = STRICT
    direction: str = "+x"  # side of the entry the interior lies on
    depth: float = 2.0
    width: float = 2.0
    wall_height: float = 1.5
    wall_thickness: float = 0.1
    door_width: float = 0.7


@dataclass
class TerrainSpec:
    __pydantic_config__ = STRICT
    kind: str = "flat"  # flat | ramp | heightfield | procedural
    size: tuple[float, float] = (10.0, 10.0)
    cell_size: float = 0.05
    origin: tuple[float, float] = (0.0, 0.0)
    height: float = 0.0
    slope: tuple[float, float] = (0.0, 0.0)
    seed: int | None = None  # procedural; falls back to the scenario seed
    amplitude: float = 0.1
    n_bumps: int = 6
    file: str | None = None  # heightfield grid, .npy or whitespace text
    obstacles: list[BoxSpec] = field(default_factory=list)


@dataclass
class UavSpec:
    __pydantic_config__ = STRICT
    start: tuple[float, float, float] = (1.0, 1.0, 2.0)
    yaw: float = 0.0
    max_speed: float = 2.0
    payload_capacity: float = 6.0


@dataclass
class MassSpec:
    __pydantic_config__ = STRICT
    tether_module: float = TETHER_MODULE_MASS
    head: float = HEAD_MASS
    ugv: float = 3.68
    payload: float = 0.0


@dataclass
class UgvSpec:
    __pydantic_config__ = STRICT
    footprint_mm: tuple[float, float, float] = (330.0, 330.0, 100.0)
    footprint_extended_mm: tuple[float, float, float] = (490.0, 330.0, 100.0)
    stow_arms: bool = True
    track_width: float = 0.28
    speed: float = 0.3
    carrying_payload: bool = False


@dataclass
class WinchSpec:
    __pydantic_config__ = STRICT
    max_length: float = 10.0
    drum_radius: float = 0.02
    encoder_cpr: int = 4096
    tau: float = 0.2
    max_rate: float = 1.0
    capture_radius: float = 0.03
    head_radius: float = 0.03


@dataclass
class CameraSpec:
    __pydantic_config__ = STRICT
    width: int = 160
    height: int = 120
    fx: float | None = None  # None keeps the default field of view
    fy: float | None = None
    max_range: float = 10.0
    min_range: float = 0.05
    noise_std: float = 0.0
    blackout: tuple[float, float] | None = None  # [start, end) seconds with no returns


@dataclass
class PerceptionSpec:
    __pydantic_config__ = STRICT
    camera: CameraSpec = field(default_factory=CameraSpec)
    voxel_size: float = 0.05
    normal_k: int = 12
    normal_radius: float = 0.25
    slope_threshold_deg: float = 30.0
    zone_patch_radius: float = 0.25
    zone_w_dist: float = 1.0
    zone_w_flatness: float = 10.0
    zone_min_navigable_fraction: float = 0.9
    dbscan_eps: float = 0.05
    dbscan_min_pts: int = 5
    aoi_radius: float = 0.5
    fusion_alpha: float = 0.7
    ground_band: float = 0.03  # points this close to the zone plane are treated as ground


@dataclass
class ControlSpec:
    __pydantic_config__ = STRICT
    dt: float = 0.05
    winch: PidGains = WINCH_GAINS
    tracking: PidGains = TRACKING_GAINS
    spline_degree: int = 3
    cruise_speed: float = 1.0
    arm_lookahead: float = 0.1
    arm_slope_tolerance: float = 0.05
    servo_gain: float = 1.2
    align_tolerance_px: float = 0.5
    align_ticks: int = 5
    retract_rate: float = 0.3
    reattach_rate: float = 0.3
    reattach_retries: int = 3


@dataclass
class PhysicsSpec:
    __pydantic_config__ = STRICT
    dt: float = 0.01
    swing_noise: float = 0.0
    flip_threshold_deg: float = 45.0
    epm_release_failures: int = 0


@dataclass
class ScenarioConfig:
    __pydantic_config__ = STRICT
    name: str = "scenario"
    seed: int = 0
    duration_limit: float = 300.0
    start: str = "deploy"  # deploy | retrieve
    scan_altitude: float = 4.0
    deploy_altitude: float = 3.0
    entry: tuple[float, float] = (5.0, 5.0)
    enclosure: EnclosureSpec | None = None
    ugv_start: tuple[float, float, float] | None = None  # x, y, yaw for retrieval starts
    terrain: TerrainSpec = field(default_factory=TerrainSpec)
    uav: UavSpec = field(default_factory=UavSpec)
    masses: MassSpec = field(default_factory=MassSpec)
    ugv: UgvSpec = field(default_factory=UgvSpec)
    winch: WinchSpec = field(default_factory=WinchSpec)
    mission: MissionConfig = field(default_factory=MissionConfig)
    perception: PerceptionSpec = field(default_factory=PerceptionSpec)
    control: ControlSpec = field(default_factory=ControlSpec)
    physics: PhysicsSpec = field(default_factory=PhysicsSpec)


_ADAPTER = TypeAdapter(ScenarioConfig)


def _format_errors(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    return config_from_dict(data)


def config_from_dict(data: dict) -> ScenarioConfig:
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ConfigError(_format_errors(e)) from e


def load_config(path: str | Path) -> ScenarioConfig:
    p = Path(path)
    return parse_config(p.read_text())


def config_to_dict(cfg: ScenarioConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg)))


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def suspended_mass(cfg: ScenarioConfig) -> float:
    m = cfg.masses
    return m.tether_module + m.head + m.ugv + m.payload


def _positive(out: list, name: str, value, strict: bool = True) -> None:
    ok = value > 0 if strict else value >= 0
    if not (isinstance(value, (int, float)) and math.isfinite(value) and ok):
        out.append(f"{name} must be {'> 0' if strict else '>= 0'}, got {value}")


def _gains(out: list, name: str, g: PidGains) -> None:
    if g.i_min > g.i_max:
        out.append(f"{name}: i_min must not exceed i_max")
    if g.out_min > g.out_max:
        out.append(f"{name}: out_min must not exceed out_max")
    for k in ("kp", "ki", "kd"):
        if not math.isfinite(getattr(g, k)):
            out.append(f"{name}.{k} must be finite")


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """Every rule violation in the scenario; an empty list means valid."""
    out: list[str] = []
    total = suspended_mass(cfg)
    if total > cfg.uav.payload_capacity + 1e-12:
        out.append(f"mass budget exceeded: {total:.3f} kg suspended > {cfg.uav.payload_capacity:.3f} kg capacity")
    for k, v in asdict(cfg.masses).items():
        _positive(out, f"masses.{k}", v, strict=(k == "ugv"))
    if cfg.ugv.carrying_payload and not 0.0 <= cfg.masses.payload <= MAX_PAYLOAD:
        out.append(f"masses.payload must lie in [0, {MAX_PAYLOAD:g}] kg when carrying, got {cfg.masses.payload}")

    fp = cfg.ugv.footprint_mm
    if fp[0] > ATTACH_AREA_MM[0] or fp[1] > ATTACH_AREA_MM[1]:
        out.append(f"ugv footprint {fp[0]:g}x{fp[1]:g} mm exceeds attachment area "
                   f"{ATTACH_AREA_MM[0]:g}x{ATTACH_AREA_MM[1]:g} mm")
    ext = cfg.ugv.footprint_extended_mm
    if not cfg.ugv.stow_arms and (ext[0] > ATTACH_AREA_MM[0] or ext[1] > ATTACH_AREA_MM[1]):
        out.append(f"ugv footprint with arms extended {ext[0]:g}x{ext[1]:g} mm exceeds attachment area; "
                   "set ugv.stow_arms")
    for i, v in enumerate(fp):
        _positive(out, f"ugv.footprint_mm[{i}]", v)
    _positive(out, "ugv.track_width", cfg.ugv.track_width)
    _positive(out, "ugv.speed", cfg.ugv.speed)

    t = cfg.terrain
    if t.kind not in ("flat", "ramp", "heightfield", "procedural"):
        out.append(f"terrain.kind must be flat, ramp, heightfield or procedural, got {t.kind!r}")
    _positive(out, "terrain.cell_size", t.cell_size)
    for i, v in enumerate(t.size):
        _positive(out, f"terrain.size[{i}]", v)
    if t.kind == "heightfield" and not t.file:
        out.append("terrain.file is required for a heightfield terrain")
    _positive(out, "terrain.n_bumps", t.n_bumps, strict=False)
    for j, b in enumerate(t.obstacles):
        for i, v in enumerate(b.size):
            _positive(out, f"terrain.obstacles[{j}].size[{i}]", v)
    x0, y0 = t.origin

    def inside(x, y):
        return x0 <= x <= x0 + t.size[0] and y0 <= y <= y0 + t.size[1]

    if not inside(*cfg.entry):
        out.append(f"entry {tuple(cfg.entry)} lies outside the terrain")
    if not inside(*cfg.uav.start[:2]):
        out.append(f"uav.start {tuple(cfg.uav.start)} lies outside the terrain")
    if cfg.ugv_start is not None and not inside(*cfg.ugv_start[:2]):
        out.append(f"ugv_start {tuple(cfg.ugv_start)} lies outside the terrain")
    if cfg.start not in ("deploy", "retrieve"):
        out.append(f"start must be 'deploy' or 'retrieve', got {cfg.start!r}")
    if cfg.start == "retrieve" and cfg.ugv_start is None:
        out.append("ugv_start is required when start is 'retrieve'")
    if cfg.enclosure is not None:
        e = cfg.enclosure
        if e.direction not in ("+x", "-x", "+y", "-y"):
            out.append(f"enclosure.direction must be one of +x, -x, +y, -y, got {e.direction!r}")
        for k in ("depth", "width", "wall_height", "wall_thickness", "door_width"):
            _positive(out, f"enclosure.{k}", getattr(e, k))
        if e.door_width >= e.width:
            out.append("enclosure.door_width must be smaller than enclosure.width")

    _positive(out, "uav.max_speed", cfg.uav.max_speed)
    _positive(out, "uav.payload_capacity", cfg.uav.payload_capacity)
    _positive(out, "duration_limit", cfg.duration_limit)
    _positive(out, "scan_altitude", cfg.scan_altitude)
    _positive(out, "deploy_altitude", cfg.deploy_altitude)

    w = cfg.winch
    for k in ("max_length", "drum_radius", "encoder_cpr", "max_rate", "capture_radius", "head_radius"):
        _positive(out, f"winch.{k}", getattr(w, k))
    _positive(out, "winch.tau", w.tau, strict=False)
    if cfg.deploy_altitude >= w.max_length:
        out.append("deploy_altitude must be below winch.max_length")

    out.extend(mission_config_violations(cfg.mission))

    p = cfg.perception
    c = p.camera
    _positive(out, "perception.camera.width", c.width)
    _positive(out, "perception.camera.height", c.height)
    for k in ("fx", "fy"):
        v = getattr(c, k)
        if v is not None:
            _positive(out, f"perception.camera.{k}", v)
    _positive(out, "perception.camera.max_range", c.max_range)
    _positive(out, "perception.camera.min_range", c.min_range, strict=False)
    if c.min_range >= c.max_range:
        out.append("perception.camera.min_range must be below max_range")
    _positive(out, "perception.camera.noise_std", c.noise_std, strict=False)
    if c.blackout is not None and not c.blackout[0] < c.blackout[1]:
        out.append("perception.camera.blackout must be an increasing [start, end) interval")
    for k in ("voxel_size", "normal_radius", "zone_patch_radius", "dbscan_eps", "aoi_radius"):
        _positive(out, f"perception.{k}", getattr(p, k))
    _positive(out, "perception.ground_band", p.ground_band, strict=False)
    if p.normal_k < 3:
        out.append(f"perception.normal_k must be >= 3, got {p.normal_k}")
    if not 0 < p.slope_threshold_deg < 90:
        out.append(f"perception.slope_threshold_deg must lie in (0, 90), got {p.slope_threshold_deg}")
    if p.dbscan_min_pts < 1:
        out.append(f"perception.dbscan_min_pts must be >= 1, got {p.dbscan_min_pts}")
    if not 0 <= p.fusion_alpha <= 1:
        out.append(f"perception.fusion_alpha must lie in [0, 1], got {p.fusion_alpha}")
    if not 0 <= p.zone_min_navigable_fraction <= 1:
        out.append("perception.zone_min_navigable_fraction must lie in [0, 1]")
    for k in ("zone_w_dist", "zone_w_flatness"):
        _positive(out, f"perception.{k}", getattr(p, k), strict=False)

    k = cfg.control
    for name in ("dt", "cruise_speed", "arm_lookahead", "servo_gain", "align_tolerance_px", "retract_rate",
                 "reattach_rate"):
        _positive(out, f"control.{name}", getattr(k, name))
    _positive(out, "control.arm_slope_tolerance", k.arm_slope_tolerance, strict=False)
    if k.spline_degree < 1:
        out.append(f"control.spline_degree must be >= 1, got {k.spline_degree}")
    if k.align_ticks < 1:
        out.append(f"control.align_ticks must be >= 1, got {k.align_ticks}")
    if k.reattach_retries < 0:
        out.append(f"control.reattach_retries must be >= 0, got {k.reattach_retries}")
    _gains(out, "control.winch", k.winch)
    _gains(out, "control.tracking", k.tracking)

    ph = cfg.physics
    _positive(out, "physics.dt", ph.dt)
    _positive(out, "physics.swing_noise", ph.swing_noise, strict=False)
    if not 0 < ph.flip_threshold_deg < 180:
        out.append(f"physics.flip_threshold_deg must lie in (0, 180), got {ph.flip_threshold_deg}")
    if ph.epm_release_failures < 0:
        out.append(f"physics.epm_release_failures must be >= 0, got {ph.epm_release_failures}")
    if ph.dt > 0 and k.dt > 0:
        ratio = k.dt / ph.dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            out.append("control.dt must be a whole multiple of physics.dt")
    return out


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------


def direction_vector(tag: str) -> np.ndarray:
    return {"+x": np.array([1.0, 0.0]), "-x": np.array([-1.0, 0.0]),
            "+y": np.array([0.0, 1.0]), "-y": np.array([0.0, -1.0])}[tag]


def enclosure_boxes(entry, e: EnclosureSpec) -> list[BoxSpec]:
    """Four walls around a room with a doorway centred on ``entry``."""
    d = direction_vector(e.direction)
    side = np.array([-d[1], d[0]])
    entry = np.asarray(entry, dtype=float)
    th = e.wall_thickness
    centre = entry + d * (e.depth / 2)
    boxes = []

    def box(c, along_d, along_side):
        # sizes are given in the room frame; map to x/y extents
        sx = abs(d[0]) * along_d + abs(side[0]) * along_side
        sy = abs(d[1]) * along_d + abs(side[1]) * along_side
        boxes.append(BoxSpec((float(c[0]), float(c[1])), (float(sx), float(sy)), e.wall_height))

    seg = (e.width - e.door_width) / 2
    off = e.door_width / 2 + seg / 2
    box(entry + side * off, th, seg)
    box(entry - side * off, th, seg)
    box(entry + d * e.depth, th, e.width)
    box(centre + side * (e.width / 2), e.depth, th)
    box(centre - side * (e.width / 2), e.depth, th)
    return boxes


def build_terrain(cfg: ScenarioConfig, base_dir: Path | None = None) -> Terrain:
    t = cfg.terrain
    sx, sy = t.size
    if t.kind == "flat":
        terrain = Terrain.flat(sx, sy, t.cell_size, t.height, t.origin)
    elif t.kind == "ramp":
        terrain = Terrain.ramp(sx, sy, t.cell_size, t.slope[0], t.slope[1], t.origin)
    elif t.kind == "procedural":
        seed = cfg.seed if t.seed is None else t.seed
        terrain = Terrain.procedural(sx, sy, t.cell_size, seed, t.amplitude, t.n_bumps, t.origin)
    elif t.kind == "heightfield":
        path = Path(t.file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        grid = np.load(path) if path.suffix == ".npy" else np.loadtxt(path)
        terrain = Terrain(t.origin, t.cell_size, grid)
    else:
        raise ConfigError(f"unknown terrain kind {t.kind!r}")
    boxes = list(t.obstacles)
    if cfg.enclosure is not None:
        boxes += enclosure_boxes(cfg.entry, cfg.enclosure)
    # overlapping boxes (wall corners) take the taller block, not the sum
    heights = terrain.heights
    for b in boxes:
        heights = np.maximum(heights, add_box(terrain, b.center, b.size, b.height).heights)
    return Terrain(terrain.origin, terrain.cell_size, heights)


def enclosure_interior(cfg: ScenarioConfig) -> np.ndarray | None:
    """Room centre, for default ground-ops waypoints."""
    if cfg.enclosure is None:
        return None
    return np.asarray(cfg.entry, dtype=float) + direction_vector(cfg.enclosure.direction) * cfg.enclosure.depth / 2
