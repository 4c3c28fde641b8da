"""Closed-loop mission execution: sense, perceive, decide, control, step."""

from __future__ import annotations

import json
import logging
import math
import time as _time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, build_terrain, direction_vector, enclosure_interior, validate_config
from .control.arms import arm_patch, compute_arm_angles
from .control.bspline import BSpline, bspline_eval, timed_spline
from .control.pid import PidState, winch_rate_controller
from .control.uav import clamp_speed, hold_position, pixel_error, servo_alignment, track_trajectory
from .eventlog import log_lines, write_event_log, write_trajectory
from .mission import (
    TERMINAL,
    DeploymentVerdict,
    EventLogEntry,
    Evidence,
    MissionConfig,
    MissionPhase,
    Observations,
    Phase,
    mission_step,
    verify_detachment,
    verify_touchdown,
)
from .perception.clustering import AreaOfInterest, Cluster, dbscan, select_target_cluster
from .perception.geometry import (
    DegenerateInputError,
    DeploymentZone,
    Plane,
    estimate_normals,
    find_deployment_zone,
    fit_plane,
    segment_navigable,
)
from .perception.mapping import AccumulatedMap, accumulate_map, pause, resume, voxel_downsample
from .perception.tracking import TrackEstimate, fuse_head_estimate
from .sensors import (
    CameraIntrinsics,
    DepthImage,
    PointCloud,
    depth_to_cloud,
    length_from_encoder,
    project_points,
    read_encoder,
    render_depth,
)
from .world import (
    Commands,
    Physics,
    Pose,
    WorldState,
    attach_point,
    command_epm,
    step_world,
    stowed_world,
    terrain_height_at,
    ugv_self_right,
    wrap_angle,
)

log = logging.getLogger(__name__)

SCAN_FRAMES = 2
HOVER_TOLERANCE = 0.03
HOVER_TICKS = 4
TOUCHDOWN_SETTLE = 0.5
DETACH_SETTLE = 0.3
# points within this many head radii of the head axis are dropped before tracking the UGV top
HEAD_MASK = 1.3
# accepted vision-minus-encoder head height window
VISION_GATE_BELOW = 0.05
VISION_GATE_ABOVE = 0.3
# longest retraction before an unconfirmed detachment counts as failed
DETACH_DEADLINE = 2.0
RANGE_GATE = 0.3
MAP_INTERVAL = 20
WAYPOINT_TOLERANCE = 0.05
SLACK_FACTOR = 1.2


@dataclass
class RunReport:
    name: str
    seed: int
    outcome: str  # success | failure | aborted | timeout
    final_phase: str
    attempt_count: int
    phase_durations: dict[str, float]
    peak_tracking_error: float
    verdicts: list[dict]
    sim_time: float
    diagnostic: str | None = None
    log_path: str | None = None
    trajectory_paths: dict[str, str] = field(default_factory=dict)
    report_path: str | None = None
    wall_time: float = 0.0
    events: list[EventLogEntry] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("events")
        return d

    def log_text(self) -> str:
        return "\n".join(log_lines(self.events)) + "\n"


def outcome_for(phase: MissionPhase, failure: bool | None, timed_out: bool) -> str:
    if phase.name == Phase.DONE:
        return "success"
    if timed_out:
        return "timeout"
    if phase.name == Phase.ABORTED:
        return "failure" if failure else "aborted"
    return "aborted"


def camera_for(cfg: ScenarioConfig) -> CameraIntrinsics:
    c = cfg.perception.camera
    base = CameraIntrinsics.scaled(c.width, c.height, max_range=c.max_range, min_range=c.min_range)
    fx = c.fx if c.fx is not None else base.fx
    fy = c.fy if c.fy is not None else base.fy
    return replace(base, fx=fx, fy=fy)


def initial_world(cfg: ScenarioConfig, base_dir: Path | None = None) -> WorldState:
    terrain = build_terrain(cfg, base_dir)
    sx, sy, alt = cfg.uav.start
    start = np.array([sx, sy, terrain_height_at(terrain, sx, sy) + alt])
    physics = Physics(swing_noise=cfg.physics.swing_noise, flip_threshold=math.radians(cfg.physics.flip_threshold_deg),
                      epm_release_failures=cfg.physics.epm_release_failures)
    w = cfg.winch
    world = stowed_world(
        terrain, start, dt=cfg.physics.dt, yaw=cfg.uav.yaw, seed=cfg.seed,
        uav={"max_speed": cfg.uav.max_speed, "payload_capacity": cfg.uav.payload_capacity},
        winch={"max_length": w.max_length, "drum_radius": w.drum_radius, "encoder_cpr": w.encoder_cpr, "tau": w.tau},
        head={"capture_radius": w.capture_radius, "radius": w.head_radius},
        ugv={"mass": cfg.masses.ugv, "carrying_payload": cfg.ugv.carrying_payload, "payload_mass": cfg.masses.payload,
             "footprint_mm": tuple(cfg.ugv.footprint_mm), "footprint_extended_mm": tuple(cfg.ugv.footprint_extended_mm),
             "track_width": cfg.ugv.track_width},
        physics=physics)
    if cfg.start == "retrieve":
        gx, gy, gyaw = cfg.ugv_start
        bottom = np.array([gx, gy, terrain_height_at(terrain, gx, gy)])
        ugv = replace(world.ugv, pose=Pose(bottom, gyaw), grounded=True)
        head = world.head
        if cfg.mission.mode == "detached":
            head = replace(head, attached=False, epm_on=False)
            world = replace(world, ugv=ugv, head=head)
        else:
            p = attach_point(ugv, head)
            length = float(np.linalg.norm(p - world.anchor))
            world = replace(world, ugv=ugv, head=replace(head, position=p, resting=True),
                            winch=replace(world.winch, deployed_length=length))
    return world


def _roi(intr: CameraIntrinsics, pose: Pose, point, radius: float) -> tuple[int, int, int, int] | None:
    u, v, z = project_points(np.asarray(point, dtype=float), intr, pose)[0]
    if not z > 1e-3:
        return None
    r = int(math.ceil(intr.fx * radius / z)) + 2
    return (int(math.floor(u)) - r, int(math.floor(v)) - r, int(math.ceil(u)) + r + 1, int(math.ceil(v)) + r + 1)


class MissionRun:
    """Mutable driver around the pure world and mission step functions."""

    def __init__(self, cfg: ScenarioConfig, base_dir: Path | None = None):
        self.cfg = cfg
        self.mcfg: MissionConfig = cfg.mission
        self.world = initial_world(cfg, base_dir)
        self.intr = camera_for(cfg)
        self.substeps = int(round(cfg.control.dt / cfg.physics.dt))
        self.dt = self.substeps * cfg.physics.dt
        self.map = AccumulatedMap(cfg.perception.voxel_size)
        self.entries: list[EventLogEntry] = []
        self.traj: dict[str, list[tuple]] = {"uav": [], "ugv": [], "head": []}
        self.phase = MissionPhase()
        self.zone: DeploymentZone | None = None
        self.ground: Plane | None = None
        self.estimate: TrackEstimate | None = None
        self.ctx: dict = {}
        self.tick_info: dict = {}
        self.peak_tracking = 0.0
        self.verdicts: list[dict] = []
        self.failure: bool | None = None
        self.diagnostic: str | None = None
        self.prev_enc = self.encoder_length()
        self.deploy_xy: np.ndarray | None = None
        self.hover_target = self.world.uav.pose.position.copy()
        self.tick = 0
        self.ctx_prev: dict = {}
        if cfg.start == "retrieve":
            self.phase = MissionPhase(Phase.ALIGN_FOR_RETRIEVAL, 0.0, 0)
            self.deploy_xy = self.world.ugv.pose.position[:2].copy()
            self.emit("phase", {"from": Phase.IDLE.value, "to": Phase.ALIGN_FOR_RETRIEVAL.value, "attempt": 0,
                                "reason": "retrieval start"})
            self.enter(self.phase.name)

    # ------------------------------------------------------------------ utils
    @property
    def now(self) -> float:
        return self.world.time

    def emit(self, kind: str, payload: dict | None = None) -> None:
        self.entries.append(EventLogEntry(self.now, self.phase.name.value, kind, payload or {}))

    def encoder_length(self) -> float:
        return length_from_encoder(read_encoder(self.world.winch))

    def blank(self) -> bool:
        b = self.cfg.perception.camera.blackout
        return b is not None and b[0] <= self.now < b[1]

    def render(self, roi=None) -> DepthImage:
        if self.blank():
            i = self.intr
            return DepthImage(i, np.full((i.height, i.width), np.nan), Pose(self.world.uav.pose.position.copy(),
                                                                              self.world.uav.pose.yaw))
        return render_depth(self.world, self.intr, noise_std=self.cfg.perception.camera.noise_std,
                            seed=self.cfg.seed, roi=roi)

    def ground_plane(self) -> Plane:
        if self.ground is None:
            if self.zone is not None:
                self.ground = self.zone.plane
            else:
                pts = depth_to_cloud(self.render()).points
                self.ground = fit_plane(pts, method="ransac", seed=self.cfg.seed)
        return self.ground

    def object_points(self, center, radius: float, max_height: float = math.inf) -> np.ndarray:
        """Downsampled points between the ground band and ``max_height`` near ``center``."""
        p = self.cfg.perception
        roi = _roi(self.intr, self.world.uav.pose, center, radius)
        pts = depth_to_cloud(self.render(roi)).points
        if len(pts) == 0:
            return pts
        h = self.ground_plane().signed_distance(pts)
        return voxel_downsample(pts[(h > p.ground_band) & (h <= max_height)], p.dbscan_eps / 2)

    def clusters_of(self, pts: np.ndarray):
        if len(pts) == 0:
            return []
        return dbscan(pts, self.cfg.perception.dbscan_eps, self.cfg.perception.dbscan_min_pts).clusters

    def object_clusters(self, center, radius: float, max_height: float = math.inf):
        """Clusters standing between the ground band and ``max_height`` near ``center``."""
        return self.clusters_of(self.object_points(center, radius, max_height))

    def largest_cluster(self, clusters, origin, radius: float) -> Cluster | None:
        best = None
        o = np.asarray(origin, dtype=float)
        for c in clusters:
            if np.linalg.norm(c.centroid[:2] - o[:2]) > radius:
                continue
            if best is None or len(c) > len(best):
                best = c
        return best

    def track_head(self) -> TrackEstimate:
        """Head estimate from the UGV-top cluster fused with the encoder."""
        w = self.world
        enc = self.encoder_length()
        anchor = w.anchor
        guess = self.estimate.position if self.estimate is not None else anchor - np.array([0.0, 0.0, enc])
        r = w.head.radius
        # look for the UGV top just below the head; the head itself hides the top face beneath it
        pts = self.object_points(guess - np.array([0.0, 0.0, r]), 0.45)
        if len(pts):
            pts = pts[np.hypot(*(pts[:, :2] - guess[:2]).T) > HEAD_MASK * r]
        z_enc = anchor[2] - enc
        # the head can sit above the encoder estimate (slack) but never well below it
        clusters = [c for c in self.clusters_of(pts)
                    if -VISION_GATE_BELOW <= c.centroid[2] + r - z_enc <= VISION_GATE_ABOVE]
        aoi = AreaOfInterest(tuple(anchor), (0.0, 0.0, -1.0), self.cfg.perception.aoi_radius)
        sel = select_target_cluster(clusters, aoi)
        est = fuse_head_estimate(sel, enc, anchor, self.estimate, self.now, self.cfg.perception.fusion_alpha, r)
        self.estimate = est
        self.tick_info["head_error"] = float(est.position[2] - w.head.position[2])
        self.tick_info["head_source"] = est.vertical_source
        return est

    def ugv_ceiling(self) -> float:
        # a grounded UGV (with the head resting on it) never rises above this
        return self.world.ugv.height + 2 * self.world.head.radius + 0.05

    def ugv_bottom_estimate(self, est: TrackEstimate) -> TrackEstimate:
        off = self.world.ugv.height + self.world.head.radius
        return replace(est, position=est.position - np.array([0.0, 0.0, off]))

    def clearance(self, est: TrackEstimate) -> float:
        return float(self.ground_plane().signed_distance(self.ugv_bottom_estimate(est).position))

    def winch_cmd(self, target_rate: float) -> float:
        enc = self.encoder_length()
        measured = (enc - self.prev_enc) / self.dt
        out = winch_rate_controller(target_rate, measured, self.ctx.get("winch_pid", PidState()),
                                    self.cfg.control.winch, self.dt)
        self.ctx["winch_pid"] = out.state
        m = self.cfg.winch.max_rate
        return min(max(out.output, -m), m)

    def follow(self, spline: BSpline) -> tuple[float, float, float]:
        t = self.now - self.ctx["t0"]
        cmd, states = track_trajectory(self.world.uav, spline, min(t, spline.duration),
                                       (self.cfg.control.tracking,) * 3, self.ctx.get("track_pid"), self.dt)
        self.ctx["track_pid"] = states
        ref = bspline_eval(spline, min(max(t, 0.0), spline.duration)).position
        err = float(np.linalg.norm(ref - self.world.uav.pose.position))
        self.peak_tracking = max(self.peak_tracking, err)
        self.tick_info["tracking_error"] = err
        return tuple(cmd.linear)

    def fly_to(self, target) -> None:
        self.ctx["t0"] = self.now
        wp = [self.world.uav.pose.position.copy(), np.asarray(target, dtype=float)]
        self.ctx["spline"] = timed_spline(wp, self.cfg.control.cruise_speed, self.cfg.control.spline_degree)
        self.ctx["target"] = np.asarray(target, dtype=float)
        self.ctx["settled"] = 0
        self.hover_target = np.asarray(target, dtype=float)

    def flight_done(self) -> bool:
        spline = self.ctx["spline"]
        if self.now - self.ctx["t0"] < spline.duration:
            return False
        err = np.linalg.norm(self.ctx["target"] - self.world.uav.pose.position)
        self.ctx["settled"] = self.ctx["settled"] + 1 if err < HOVER_TOLERANCE else 0
        return self.ctx["settled"] >= HOVER_TICKS

    def hold(self) -> tuple[float, float, float]:
        return tuple(hold_position(self.world.uav, self.hover_target).linear)

    def drive_to(self, goal) -> tuple[tuple[float, float], bool]:
        ugv = self.world.ugv
        d = np.asarray(goal, dtype=float) - ugv.pose.position[:2]
        dist = float(np.linalg.norm(d))
        if dist < WAYPOINT_TOLERANCE:
            return (0.0, 0.0), True
        heading = wrap_angle(math.atan2(d[1], d[0]) - ugv.pose.yaw)
        speed = self.cfg.ugv.speed
        v = speed * max(0.0, math.cos(heading)) * min(1.0, dist / 0.2)
        w = max(-2.0, min(2.0, 3.0 * heading))
        half = ugv.track_width / 2
        return (v - w * half, v + w * half), False

    def arm_rates(self) -> tuple[float, float]:
        k = self.cfg.control
        ugv = self.world.ugv
        try:
            cmd = compute_arm_angles(arm_patch(self.world.terrain, ugv, k.arm_lookahead), ugv, k.arm_lookahead,
                                     k.arm_slope_tolerance)
        except DegenerateInputError:
            return (0.0, 0.0)
        target = np.array([cmd.front_angle, cmd.rear_angle])
        err = (target - ugv.arm_angles + math.pi) % (2 * math.pi) - math.pi
        return tuple(np.clip(err / (2 * self.dt), -math.pi, math.pi))

    def slack_rate(self, factor: float) -> float:
        w = self.world
        dist = float(np.linalg.norm(attach_point(w.ugv, w.head) - w.anchor))
        target = min(factor * dist, self.cfg.winch.max_length)
        m = self.cfg.winch.max_rate
        return min(max(2.0 * (target - self.encoder_length()), -m), m)

    def map_update(self, force: bool = False) -> None:
        if force or self.tick % MAP_INTERVAL == 0:
            self.map = accumulate_map(self.map, depth_to_cloud(self.render()))

    # --------------------------------------------------------------- phases
    def enter(self, name: Phase) -> None:
        self.ctx = {"winch_pid": PidState()}
        cfg = self.cfg
        w = self.world
        if name == Phase.SCAN_AND_MAP:
            ex, ey = cfg.entry
            z = terrain_height_at(w.terrain, ex, ey) + cfg.scan_altitude
            self.fly_to([ex, ey, z])
            self.ctx["frames"] = 0
        elif name == Phase.POSITION_OVER_ZONE:
            c = self.zone.center
            self.fly_to([c[0], c[1], c[2] + cfg.deploy_altitude])
        elif name == Phase.LOWER_TETHER:
            self.hover_target = w.uav.pose.position.copy()
        elif name == Phase.VERIFY_TOUCHDOWN:
            self.ctx["t0"] = self.now
        elif name == Phase.DETACH:
            self.ctx.update(t0=self.now, series=[], ugv_track=[], clearance=self.tick_info.get("clearance", math.nan))
        elif name == Phase.GROUND_OPS:
            self.deploy_xy = w.ugv.pose.position[:2].copy()
            if w.ugv.grounded and not w.ugv.pose.up_flag:
                self.world = ugv_self_right(self.world)
                self.log_world_events()
            wps = [np.asarray(p, dtype=float) for p in self.mcfg.ground_ops_waypoints]
            if not wps:
                inner = enclosure_interior(cfg)
                wps = [inner] if inner is not None else [np.asarray(cfg.entry, dtype=float)]
            self.ctx["waypoints"] = wps
            self.ctx["wp"] = 0
        elif name == Phase.ALIGN_FOR_RETRIEVAL:
            self.ctx["aligned"] = 0
            self.ctx["ugv_guess"] = w.ugv.pose.position + np.array([0.0, 0.0, w.ugv.height])
            self.hover_target = w.uav.pose.position.copy()
        elif name == Phase.REATTACH:
            self.ctx.update(retries=0, stage="lower", aligned=0, ugv_guess=self.ctx_prev.get("ugv_guess"),
                            top_z=self.ctx_prev.get("top_z"))
            self.hover_target = w.uav.pose.position.copy()
        elif name == Phase.RETRACT:
            self.hover_target = w.uav.pose.position.copy()

    def observe_and_control(self) -> tuple[Observations, Commands]:
        """Run the current phase's perception and controllers."""
        handler = getattr(self, f"_phase_{self.phase.name.name.lower()}")
        return handler(self.world)

    def _phase_idle(self, w):
        return Observations(start=True), Commands()

    def _phase_scan_and_map(self, w):
        v = self.follow(self.ctx["spline"])
        done = False
        if self.flight_done():
            self.map_update(force=True)
            self.ctx["frames"] += 1
            done = self.ctx["frames"] >= SCAN_FRAMES
            v = self.hold()
        return Observations(scan_complete=done), Commands(uav_velocity=v)

    def _phase_select_zone(self, w):
        p = self.cfg.perception
        cloud = self.map.cloud()
        pts = cloud.points
        normals = estimate_normals(cloud, p.normal_k, p.normal_radius)
        mask = segment_navigable(normals, math.radians(p.slope_threshold_deg))
        if self.cfg.enclosure is not None:
            # the hidden space itself is out of reach from the air
            mask = replace(mask, mask=mask.mask & ~self._in_enclosure(pts))
        ex, ey = self.cfg.entry
        entry = np.array([ex, ey, terrain_height_at(w.terrain, ex, ey)])
        res = find_deployment_zone(cloud, mask, entry, p.zone_patch_radius, p.zone_w_dist, p.zone_w_flatness,
                                   p.zone_min_navigable_fraction)
        self.zone = res.zone
        payload = {"reason": res.reason, "points": len(pts), "candidates": int(res.candidates.sum())}
        if res.zone is not None:
            payload.update(center=res.zone.center, distance_to_entry=res.zone.distance_to_entry,
                           tilt_deg=math.degrees(res.zone.plane.tilt))
        self.emit("zone_search", payload)
        return Observations(zone_searched=True, zone=res.zone), Commands(uav_velocity=self.hold())

    def _in_enclosure(self, pts: np.ndarray) -> np.ndarray:
        e = self.cfg.enclosure
        d = direction_vector(e.direction)
        side = np.array([-d[1], d[0]])
        rel = pts[:, :2] - np.asarray(self.cfg.entry, dtype=float)
        a = rel @ d
        b = rel @ side
        m = e.wall_thickness
        return (a >= -m) & (a <= e.depth + m) & (np.abs(b) <= e.width / 2 + m)

    def _phase_position_over_zone(self, w):
        v = self.follow(self.ctx["spline"])
        done = self.flight_done()
        return Observations(at_zone=done), Commands(uav_velocity=v)

    def _phase_lower_tether(self, w):
        self.map = accumulate_map(self.map, PointCloud(np.zeros((0, 3))))
        est = self.track_head()
        c = self.clearance(est)
        self.tick_info["clearance"] = c
        rate = self.winch_cmd(self.mcfg.descent_rate)
        return (Observations(clearance=c, ugv_attached=w.head.attached),
                Commands(uav_velocity=self.hold(), winch_rate=rate))

    def _phase_verify_touchdown(self, w):
        est = self.track_head()
        c = self.clearance(est)
        self.tick_info["clearance"] = c
        settle = self.now - self.ctx["t0"] >= TOUCHDOWN_SETTLE
        verdict = None
        rate = 0.0
        if not settle:
            rate = self.winch_cmd(0.5 * self.mcfg.descent_rate)
        else:
            if self.mcfg.landing_criterion == "separation":
                verdict = True
            else:
                verdict = verify_touchdown(self.ugv_bottom_estimate(est), self.ground_plane(),
                                           self.mcfg.touchdown_threshold)
            self.emit("touchdown_check", {"clearance": c, "touchdown": verdict})
        return (Observations(clearance=c, ugv_attached=w.head.attached, touchdown=verdict),
                Commands(uav_velocity=self.hold(), winch_rate=rate))

    def _phase_detach(self, w):
        elapsed = self.now - self.ctx["t0"]
        if elapsed < DETACH_SETTLE:
            return Observations(), Commands(uav_velocity=self.hold(), winch_rate=0.0)
        rate = self.winch_cmd(-self.cfg.control.retract_rate)
        if self.mcfg.landing_criterion == "ground_plane":
            v = DeploymentVerdict("success", Evidence(self.ctx["clearance"], (), True))
        else:
            r = w.head.radius
            head_z = w.anchor[2] - self.encoder_length()
            center = self.zone.center if self.zone is not None else w.anchor
            guess = self.ctx.get("ugv_c", np.asarray(center, dtype=float) + np.array([0.0, 0.0, w.ugv.height]))
            c = self.largest_cluster(self.object_clusters(guess, 0.45, self.ugv_ceiling()), guess, 0.4)
            if c is None:
                return Observations(), Commands(uav_velocity=self.hold(), winch_rate=rate)
            self.ctx["ugv_c"] = c.centroid
            top_z = float(c.centroid[2])
            sep = head_z - (top_z + r)
            self.ctx["series"].append(sep)
            self.ctx["ugv_track"].append(c.centroid.copy())
            self.tick_info["separation"] = sep
            n = self.mcfg.verify_window
            track = self.ctx["ugv_track"][-n:]
            span = max(len(track) - 1, 1) * self.dt
            speed = float(np.linalg.norm(track[-1] - track[0])) / span
            stationary = speed < self.mcfg.stationary_speed
            v = verify_detachment(self.ctx["series"], stationary, self.mcfg.detach_verify_threshold, n,
                                  self.ctx["clearance"])
            # slack paid out at touchdown delays the rise; a failure only counts once it is conclusive
            dragged = not stationary and len(track) >= n
            if v.outcome == "failure" and not dragged and elapsed < DETACH_SETTLE + DETACH_DEADLINE:
                v = DeploymentVerdict("undecided", v.evidence)
        if v.outcome != "undecided":
            self.verdicts.append({"time": self.now, "outcome": v.outcome, "attempt": self.phase.attempt_count})
        return Observations(detach_verdict=v), Commands(uav_velocity=self.hold(), winch_rate=rate)

    def _ground_winch(self) -> float:
        if self.mcfg.mode == "attached":
            return self.slack_rate(SLACK_FACTOR)
        if self.world.winch.deployed_length > 0:
            return -self.cfg.control.retract_rate
        return 0.0

    def _phase_ground_ops(self, w):
        self.map_update()
        wps = self.ctx["waypoints"]
        tracks, arrived = self.drive_to(wps[self.ctx["wp"]])
        if arrived:
            self.emit("waypoint", {"index": self.ctx["wp"]})
            self.ctx["wp"] += 1
        done = self.ctx["wp"] >= len(wps)
        return (Observations(ground_ops_done=done),
                Commands(uav_velocity=self.hold(), winch_rate=self._ground_winch(), track_speeds=tracks,
                         arm_rates=self.arm_rates()))

    def _phase_return_and_signal(self, w):
        self.map_update()
        tracks, arrived = self.drive_to(self.deploy_xy)
        if arrived:
            self.emit("signal", {"position": w.ugv.pose.position})
        return (Observations(returned=arrived),
                Commands(uav_velocity=self.hold(), winch_rate=self._ground_winch(), track_speeds=tracks,
                         arm_rates=self.arm_rates()))

    def servo(self) -> tuple[tuple[float, float, float], float | None]:
        """Velocity that centres the UGV cluster in the image; returns the pixel error too."""
        w = self.world
        guess = self.ctx["ugv_guess"]
        c = self.largest_cluster(self.object_clusters(guess, 0.45, self.ugv_ceiling()), guess, 0.5)
        if c is None:
            return self.hold(), None
        self.ctx["ugv_guess"] = c.centroid
        self.ctx["top_z"] = float(c.centroid[2])
        pose = w.uav.pose
        u, v, depth = project_points(c.centroid, self.intr, pose)[0]
        cmd = servo_alignment((u, v), self.intr, depth, self.cfg.control.servo_gain, pose.yaw)
        err = pixel_error((u, v), self.intr)
        vz = 1.0 * (self.hover_target[2] - pose.position[2])
        vel = cmd.linear + np.array([0.0, 0.0, vz])
        self.tick_info["pixel_error"] = err
        return tuple(clamp_speed(vel, w.uav.max_speed)), err

    def _phase_align_for_retrieval(self, w):
        vel, err = self.servo()
        ok = err is not None and err < self.cfg.control.align_tolerance_px
        self.ctx["aligned"] = self.ctx["aligned"] + 1 if ok else 0
        done = self.ctx["aligned"] >= self.cfg.control.align_ticks
        if done:
            self.hover_target = w.uav.pose.position.copy()
        rate = self.slack_rate(1.0) if self.mcfg.mode == "attached" else 0.0
        return Observations(aligned=done), Commands(uav_velocity=vel, winch_rate=rate)

    def _phase_reattach(self, w):
        k = self.cfg.control
        r = w.head.radius
        if w.head.attached:
            return Observations(reattach="captured"), Commands(uav_velocity=self.hold())
        top_z = self.ctx.get("top_z")
        if top_z is None:
            top_z = float(w.ugv.pose.position[2] + w.ugv.height)
        contact = w.anchor[2] - (top_z + r)
        enc = self.encoder_length()
        stage = self.ctx["stage"]
        vel = self.hold()
        rate = 0.0
        if stage == "lower":
            if contact - enc > RANGE_GATE:
                # the head occludes the UGV top when it is close to the lens; servo only once it looks small
                head_px = r / max(w.uav.pose.position[2] - (w.anchor[2] - enc), 1e-3)
                ugv_px = 0.5 * min(w.ugv.length, w.ugv.width) / max(w.uav.pose.position[2] - top_z, 1e-3)
                if head_px < 0.25 * ugv_px:
                    vel, _ = self.servo()
                    self.hover_target = w.uav.pose.position.copy()
                rate = self.winch_cmd(k.reattach_rate)
            else:
                rate = self.winch_cmd(min(k.reattach_rate, 0.1))
            if enc > contact + 2 * r:
                self.ctx["retries"] += 1
                self.emit("reattach_miss", {"retry": self.ctx["retries"], "head": w.head.position})
                if self.ctx["retries"] > k.reattach_retries:
                    return Observations(reattach="failed"), Commands(uav_velocity=vel)
                self.ctx.update(stage="raise", winch_pid=PidState())
        elif stage == "raise":
            rate = self.winch_cmd(-k.reattach_rate)
            if enc <= max(contact - 2 * RANGE_GATE, 0.0):
                self.ctx.update(stage="realign", aligned=0, winch_pid=PidState())
        elif stage == "realign":
            vel, err = self.servo()
            ok = err is not None and err < k.align_tolerance_px
            self.ctx["aligned"] = self.ctx["aligned"] + 1 if ok else 0
            if self.ctx["aligned"] >= k.align_ticks:
                self.hover_target = w.uav.pose.position.copy()
                self.ctx.update(stage="lower", winch_pid=PidState())
        return Observations(), Commands(uav_velocity=vel, winch_rate=rate)

    def _phase_retract(self, w):
        stowed = w.winch.deployed_length <= 0.0
        rate = 0.0 if stowed else self.winch_cmd(-self.cfg.control.retract_rate)
        if not stowed and self.encoder_length() < 0.05:
            rate = -self.cfg.control.retract_rate
        return Observations(stowed=stowed, ugv_attached=w.head.attached), Commands(uav_velocity=self.hold(),
                                                                                  winch_rate=rate)

    # ----------------------------------------------------------------- loop
    def log_world_events(self) -> None:
        for ev in self.world.events:
            self.entries.append(EventLogEntry(ev.time, self.phase.name.value, f"world.{ev.kind}", dict(ev.payload)))
        self.world = replace(self.world, events=())

    def record(self) -> None:
        w = self.world
        t = w.time
        self.traj["uav"].append((t, *w.uav.pose.position, w.uav.pose.yaw))
        self.traj["ugv"].append((t, *w.ugv.pose.position, w.ugv.pose.yaw))
        self.traj["head"].append((t, *w.head.position, 0.0))

    def step(self) -> None:
        self.tick_info = {}
        self.record()
        obs, cmd = self.observe_and_control()
        res = mission_step(self.phase, self.mcfg, obs, self.now)
        for e in res.events:
            self.entries.append(e)
            if e.kind == "diagnostic":
                self.diagnostic = e.payload.get("reason")
                self.failure = bool(e.payload.get("failure"))
        if res.commands.pause_map:
            self.map = pause(self.map)
        if res.commands.resume_map:
            self.map = resume(self.map)
        changed = res.phase.name != self.phase.name or res.phase.attempt_count != self.phase.attempt_count
        self.ctx_prev = self.ctx
        self.phase = res.phase
        if res.commands.epm is not None:
            self.world = command_epm(replace(self.world, events=()), res.commands.epm)
            self.log_world_events()
        if changed and self.phase.name not in TERMINAL:
            self.enter(self.phase.name)
            # a freshly entered phase starts from a hold; its controllers run next tick
            cmd = Commands(uav_velocity=self.hold())
        w = self.world
        info = {
            "tether_length": self.encoder_length(),
            "voxel_count": self.map.voxel_count,
            "attached": w.head.attached,
        }
        info.update(self.tick_info)
        self.emit("tick", info)
        self.prev_enc = self.encoder_length()
        if self.phase.name in TERMINAL:
            return
        for _ in range(self.substeps):
            self.world = step_world(self.world, cmd)
            self.log_world_events()
        self.tick += 1

    def run(self) -> tuple[bool, float]:
        timed_out = False
        limit = self.cfg.duration_limit
        while self.phase.name not in TERMINAL:
            if self.now >= limit:
                timed_out = True
                self.emit("timeout", {"limit": limit})
                break
            try:
                self.step()
            except Exception as exc:  # runtime abort keeps the log
                log.exception("mission aborted by runtime error")
                self.diagnostic = f"{type(exc).__name__}: {exc}"
                self.failure = False
                self.entries.append(EventLogEntry(self.now, self.phase.name.value, "diagnostic",
                                                  {"reason": self.diagnostic, "failure": False}))
                self.entries.append(EventLogEntry(self.now, Phase.ABORTED.value, "phase",
                                                  {"from": self.phase.name.value, "to": Phase.ABORTED.value,
                                                   "attempt": self.phase.attempt_count, "reason": self.diagnostic}))
                self.phase = MissionPhase(Phase.ABORTED, self.now, self.phase.attempt_count)
        self.record()
        return timed_out, self.now


def phase_durations(entries, end_time: float) -> dict[str, float]:
    out: dict[str, float] = {}
    cur, t0 = None, 0.0
    for e in entries:
        if e.kind == "phase":
            if cur is not None:
                out[cur] = out.get(cur, 0.0) + e.time - t0
            cur, t0 = e.payload["to"], e.time
    if cur is not None:
        out[cur] = out.get(cur, 0.0) + end_time - t0
    return {k: round(v, 9) for k, v in out.items()}


def run_scenario(cfg: ScenarioConfig, out_dir: str | Path | None = None, base_dir: Path | None = None,
                 check: bool = True) -> RunReport:
    """Execute one scenario end to end; writes logs when ``out_dir`` is given."""
    if check:
        problems = validate_config(cfg)
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))
    t_wall = _time.perf_counter()
    run = MissionRun(cfg, base_dir)
    timed_out, end = run.run()
    outcome = outcome_for(run.phase, run.failure, timed_out)
    report = RunReport(
        name=cfg.name, seed=cfg.seed, outcome=outcome, final_phase=run.phase.name.value,
        attempt_count=run.phase.attempt_count, phase_durations=phase_durations(run.entries, end),
        peak_tracking_error=round(run.peak_tracking, 9), verdicts=run.verdicts, sim_time=round(end, 9),
        diagnostic=run.diagnostic, events=run.entries)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.log_path = str(write_event_log(out / "events.jsonl", run.entries))
        for body, rows in run.traj.items():
            report.trajectory_paths[body] = str(write_trajectory(out / f"trajectory_{body}.csv", rows))
        report.report_path = str(out / "report.json")
    report.wall_time = _time.perf_counter() - t_wall
    if report.report_path:
        Path(report.report_path).write_text(json.dumps(report.to_json(), indent=2, default=float) + "\n")
    return report


