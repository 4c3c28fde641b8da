"""Fixed-timestep plant: heightfield terrain, kinematic UAV, winch with a
pendulum tether head, electro-permanent magnet (EPM) and a tracked UGV.

Every operation takes a ``WorldState`` and returns a new one; nothing is
mutated in place. Events produced during a call are attached to the returned
state in ``WorldState.events`` and cleared on the next call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

GRAVITY = 9.81
STOW_EPS = 1e-9
# shortest pendulum length used for the swing frequency; avoids ω → ∞ near the drum
MIN_PENDULUM_LENGTH = 0.05
MAX_SWING = 1.45
SELF_RIGHT_DURATION = 2.0


class TerrainBoundsError(ValueError):
    """Raised when a terrain query falls outside the elevation grid."""


class SelfRightRefused(RuntimeError):
    pass


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# --------------------------------------------------------------------------
# Terrain
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Terrain:
    """Elevation grid; ``heights[r, c]`` sits at (origin_x + c*cell, origin_y + r*cell)."""

    origin: tuple[float, float]
    cell_size: float
    heights: np.ndarray

    def __post_init__(self):
        h = np.array(self.heights, dtype=float)
        if h.ndim != 2 or h.shape[0] < 2 or h.shape[1] < 2:
            raise ValueError(f"terrain grid must be at least 2x2, got shape {h.shape}")
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if not np.all(np.isfinite(h)):
            raise ValueError("terrain heights must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def rows(self) -> int:
        return self.heights.shape[0]

    @property
    def cols(self) -> int:
        return self.heights.shape[1]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return (ox, ox + (self.cols - 1) * self.cell_size, oy, oy + (self.rows - 1) * self.cell_size)

    @cached_property
    def zmin(self) -> float:
        return float(self.heights.min())

    @cached_property
    def zmax(self) -> float:
        return float(self.heights.max())

    def contains(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.extent
        return x0 <= x <= x1 and y0 <= y <= y1

    def sample(self, xs, ys) -> np.ndarray:
        """Vectorized bilinear lookup; out-of-grid samples come back as NaN."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        fx = (xs - self.origin[0]) / self.cell_size
        fy = (ys - self.origin[1]) / self.cell_size
        inside = (fx >= 0) & (fx <= self.cols - 1) & (fy >= 0) & (fy <= self.rows - 1)
        fx = np.clip(fx, 0, self.cols - 1)
        fy = np.clip(fy, 0, self.rows - 1)
        c0 = np.minimum(np.floor(fx).astype(np.intp), self.cols - 2)
        r0 = np.minimum(np.floor(fy).astype(np.intp), self.rows - 2)
        tx = fx - c0
        ty = fy - r0
        h = self.heights
        z = (h[r0, c0] * (1 - tx) * (1 - ty) + h[r0, c0 + 1] * tx * (1 - ty)
             + h[r0 + 1, c0] * (1 - tx) * ty + h[r0 + 1, c0 + 1] * tx * ty)
        return np.where(inside, z, np.nan)

    @classmethod
    def flat(cls, size_x: float, size_y: float, cell_size: float, z: float = 0.0,
             origin: tuple[float, float] = (0.0, 0.0)) -> Terrain:
        cols = int(round(size_x / cell_size)) + 1
        rows = int(round(size_y / cell_size)) + 1
        return cls(origin, cell_size, np.full((rows, cols), float(z)))

    @classmethod
    def ramp(cls, size_x: float, size_y: float, cell_size: float, slope_x: float,
             slope_y: float = 0.0, origin: tuple[float, float] = (0.0, 0.0)) -> Terrain:
        cols = int(round(size_x / cell_size)) + 1
        rows = int(round(size_y / cell_size)) + 1
        xs = np.arange(cols) * cell_size
        ys = np.arange(rows) * cell_size
        return cls(origin, cell_size, slope_x * xs[None, :] + slope_y * ys[:, None])

    @classmethod
    def procedural(cls, size_x: float, size_y: float, cell_size: float, seed: int,
                   amplitude: float = 0.1, n_bumps: int = 6, origin: tuple[float, float] = (0.0, 0.0)) -> Terrain:
        """Sum of random Gaussian bumps and dips; smooth enough to stay mostly navigable."""
        rng = np.random.default_rng(seed)
        cols = int(round(size_x / cell_size)) + 1
        rows = int(round(size_y / cell_size)) + 1
        X, Y = np.meshgrid(np.arange(cols) * cell_size, np.arange(rows) * cell_size)
        z = np.zeros_like(X)
        for _ in range(n_bumps):
            cx, cy = rng.uniform(0, size_x), rng.uniform(0, size_y)
            sigma = rng.uniform(0.8, 2.0)
            z += rng.uniform(-amplitude, amplitude) * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * sigma**2))
        return cls(origin, cell_size, z)


def add_box(terrain: Terrain, center: tuple[float, float], size: tuple[float, float], height: float) -> Terrain:
    """Raise an axis-aligned rectangular block (e.g. a culvert housing) onto the grid."""
    ox, oy = terrain.origin
    xs = ox + np.arange(terrain.cols) * terrain.cell_size
    ys = oy + np.arange(terrain.rows) * terrain.cell_size
    inx = np.abs(xs - center[0]) <= size[0] / 2 + 1e-9
    iny = np.abs(ys - center[1]) <= size[1] / 2 + 1e-9
    h = np.array(terrain.heights)
    mask = iny[:, None] & inx[None, :]
    h[mask] = np.maximum(h[mask], h[mask] + height)
    return Terrain(terrain.origin, terrain.cell_size, h)


def terrain_height_at(terrain: Terrain, x: float, y: float) -> float:
    """Bilinear elevation at (x, y)."""
    if not (math.isfinite(x) and math.isfinite(y)) or not terrain.contains(x, y):
        x0, x1, y0, y1 = terrain.extent
        raise TerrainBoundsError(f"query ({x}, {y}) outside terrain [{x0}, {x1}] x [{y0}, {y1}]")
    fx = (x - terrain.origin[0]) / terrain.cell_size
    fy = (y - terrain.origin[1]) / terrain.cell_size
    c0 = min(int(fx), terrain.cols - 2)
    r0 = min(int(fy), terrain.rows - 2)
    tx, ty = fx - c0, fy - r0
    h = terrain.heights
    return float(h[r0, c0] * (1 - tx) * (1 - ty) + h[r0, c0 + 1] * tx * (1 - ty)
                 + h[r0 + 1, c0] * (1 - tx) * ty + h[r0 + 1, c0 + 1] * tx * ty)


# --------------------------------------------------------------------------
# State
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Pose:
    position: np.ndarray
    yaw: float = 0.0
    up_flag: bool = True

    def __post_init__(self):
        p = np.array(self.position, dtype=float).reshape(3)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))


@dataclass(frozen=True, eq=False)
class UavState:
    pose: Pose
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    max_speed: float = 2.0
    payload_capacity: float = 6.0


@dataclass(frozen=True, eq=False)
class WinchState:
    deployed_length: float = 0.0
    max_length: float = 10.0
    rate: float = 0.0
    drum_radius: float = 0.02
    encoder_cpr: int = 4096
    anchor_offset: tuple[float, float, float] = (0.0, 0.0, -0.1)
    # first-order actuator lag between commanded and actual drum rate
    tau: float = 0.2

    @property
    def stowed(self) -> bool:
        return self.deployed_length <= STOW_EPS


@dataclass(frozen=True, eq=False)
class TetherHeadState:
    position: np.ndarray
    swing: np.ndarray = field(default_factory=lambda: np.zeros(2))
    swing_rate: np.ndarray = field(default_factory=lambda: np.zeros(2))
    epm_on: bool = True
    attached: bool = True
    capture_radius: float = 0.03
    radius: float = 0.03
    resting: bool = False


@dataclass(frozen=True, eq=False)
class UgvState:
    """Ground robot; ``pose.position`` is the bottom centre of the chassis."""

    pose: Pose
    track_speeds: np.ndarray = field(default_factory=lambda: np.zeros(2))
    arm_angles: np.ndarray = field(default_factory=lambda: np.zeros(2))
    mass: float = 3.68
    carrying_payload: bool = False
    payload_mass: float = 0.0
    footprint_mm: tuple[float, float, float] = (330.0, 330.0, 100.0)
    footprint_extended_mm: tuple[float, float, float] = (490.0, 330.0, 100.0)
    track_width: float = 0.28
    grounded: bool = False
    vz: float = 0.0

    @property
    def length(self) -> float:
        return self.footprint_mm[0] / 1000.0

    @property
    def width(self) -> float:
        return self.footprint_mm[1] / 1000.0

    @property
    def height(self) -> float:
        return self.footprint_mm[2] / 1000.0


@dataclass(frozen=True)
class Physics:
    gravity: float = GRAVITY
    flip_threshold: float = math.radians(45.0)
    swing_noise: float = 0.0  # rad/s per sqrt(s), white-noise kicks on the swing rate
    contact_tol: float = 1e-6
    epm_release_failures: int = 0  # injected fault: first N EPM-off commands are ignored


@dataclass(frozen=True)
class WorldEvent:
    time: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class WorldState:
    dt: float
    terrain: Terrain
    uav: UavState
    winch: WinchState
    head: TetherHeadState
    ugv: UgvState
    rng_seed: int = 0
    physics: Physics = field(default_factory=Physics)
    step_index: int = 0
    events: tuple[WorldEvent, ...] = ()
    release_swing: float = 0.0
    epm_faults_used: int = 0
    winch_warned: bool = False
    taut_warned: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    @property
    def anchor(self) -> np.ndarray:
        return anchor_world(self.uav, self.winch)

    @property
    def ugv_stowed(self) -> bool:
        return self.head.attached and self.winch.stowed


@dataclass(frozen=True)
class Commands:
    uav_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    winch_rate: float = 0.0
    track_speeds: tuple[float, float] = (0.0, 0.0)
    arm_rates: tuple[float, float] = (0.0, 0.0)
    epm_command: bool | None = None

    def is_finite(self) -> bool:
        vals = [*self.uav_velocity, self.winch_rate, *self.track_speeds, *self.arm_rates]
        return all(math.isfinite(v) for v in vals)


def anchor_world(uav: UavState, winch: WinchState) -> np.ndarray:
    return uav.pose.position + rot_z(uav.pose.yaw) @ np.asarray(winch.anchor_offset, dtype=float)


def attach_offset(ugv: UgvState, head: TetherHeadState) -> np.ndarray:
    """Vector from the UGV bottom centre to the head centre when coupled."""
    return np.array([0.0, 0.0, ugv.height + head.radius])


def attach_point(ugv: UgvState, head: TetherHeadState) -> np.ndarray:
    return ugv.pose.position + attach_offset(ugv, head)


def swing_direction(swing: np.ndarray) -> np.ndarray:
    d = np.array([math.tan(swing[0]), math.tan(swing[1]), -1.0])
    return d / math.sqrt(d @ d)


def swing_angle(swing: np.ndarray) -> float:
    """Angle between the tether and the downward vertical."""
    return math.acos(min(1.0, -swing_direction(swing)[2]))


def _swing_from_vector(v: np.ndarray) -> np.ndarray:
    dz = -v[2]
    if dz <= 1e-12:
        return np.array([math.copysign(MAX_SWING, v[0]), math.copysign(MAX_SWING, v[1])])
    return np.clip(np.array([math.atan2(v[0], dz), math.atan2(v[1], dz)]), -MAX_SWING, MAX_SWING)


def _in_footprint(ugv: UgvState, xy: np.ndarray) -> bool:
    rel = xy - ugv.pose.position[:2]
    c, s = math.cos(ugv.pose.yaw), math.sin(ugv.pose.yaw)
    lx = c * rel[0] + s * rel[1]
    ly = -s * rel[0] + c * rel[1]
    return abs(lx) <= ugv.length / 2 and abs(ly) <= ugv.width / 2


def _ground(terrain: Terrain, xy: np.ndarray) -> float:
    if terrain.contains(xy[0], xy[1]):
        return terrain_height_at(terrain, xy[0], xy[1])
    return -math.inf


def _head_support(world: WorldState, ugv: UgvState, xy: np.ndarray) -> float:
    r = world.head.radius
    z = _ground(world.terrain, xy) + r
    if not world.head.attached and _in_footprint(ugv, xy):
        z = max(z, ugv.pose.position[2] + ugv.height + r)
    return z


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def command_epm(world: WorldState, on: bool) -> WorldState:
    """Switch the tether-head magnet; capture on contact, release when switched off."""
    head, ugv = world.head, world.ugv
    events = list(world.events)
    t = world.time
    if not on:
        if head.epm_on and world.epm_faults_used < world.physics.epm_release_failures:
            events.append(WorldEvent(t, "epm_fault", {"command": "off"}))
            return replace(world, events=tuple(events), epm_faults_used=world.epm_faults_used + 1)
        release_swing = world.release_swing
        if head.attached:
            events.append(WorldEvent(t, "detach", {"ugv_z": float(ugv.pose.position[2])}))
            if not ugv.grounded:
                release_swing = swing_angle(head.swing)
                ugv = replace(ugv, vz=0.0)
            head = replace(head, epm_on=False, attached=False, resting=False if not ugv.grounded else head.resting)
        else:
            head = replace(head, epm_on=False)
        return replace(world, head=head, ugv=ugv, events=tuple(events), release_swing=release_swing)
    head = replace(head, epm_on=True)
    world = replace(world, head=head)
    return _try_capture(world, events)


def _try_capture(world: WorldState, events: list) -> WorldState:
    head, ugv = world.head, world.ugv
    if head.epm_on and not head.attached:
        target = attach_point(ugv, head)
        gap = float(np.linalg.norm(head.position - target))
        if gap <= head.capture_radius:
            if ugv.grounded:
                # the head settles onto the UGV, but only with enough tether to reach it
                if np.linalg.norm(target - anchor_world(world.uav, world.winch)) > world.winch.deployed_length + 1e-9:
                    return replace(world, events=tuple(events))
                head = replace(head, position=target, resting=True)
            else:
                # an airborne UGV is pulled onto the tethered head
                p = ugv.pose.position + (head.position - target)
                ugv = replace(ugv, vz=0.0, pose=Pose(p, ugv.pose.yaw, ugv.pose.up_flag))
                head = replace(head, resting=False)
            events.append(WorldEvent(world.time, "attach", {"gap": gap}))
            head = replace(head, attached=True, swing_rate=np.zeros(2))
            return replace(world, head=head, ugv=ugv, events=tuple(events), taut_warned=False)
    return replace(world, events=tuple(events))


def _drive(world: WorldState, ugv: UgvState, cmd: Commands, dt: float) -> UgvState:
    left, right = cmd.track_speeds
    v = 0.5 * (left + right)
    w = (right - left) / ugv.track_width
    yaw = ugv.pose.yaw + w * dt
    pos = ugv.pose.position.copy()
    pos[0] += v * math.cos(yaw) * dt
    pos[1] += v * math.sin(yaw) * dt
    if not world.terrain.contains(pos[0], pos[1]):
        pos[:2] = ugv.pose.position[:2]
    pos[2] = terrain_height_at(world.terrain, pos[0], pos[1])
    return replace(ugv, pose=Pose(pos, yaw, ugv.pose.up_flag), track_speeds=np.array([left, right], dtype=float))


def _integrate_arms(ugv: UgvState, rates, dt: float) -> UgvState:
    arms = ugv.arm_angles + np.asarray(rates, dtype=float) * dt
    if ugv.carrying_payload:
        arms = np.clip(arms, 0.0, math.pi / 2)
    else:
        arms = (arms + math.pi) % (2 * math.pi) - math.pi
    return replace(ugv, arm_angles=arms)


def _critically_damped(theta: np.ndarray, rate: np.ndarray, omega: float, dt: float):
    e = math.exp(-omega * dt)
    b = rate + omega * theta
    return (theta + b * dt) * e, (rate - omega * b * dt) * e


def step_world(world: WorldState, cmd: Commands) -> WorldState:
    """Advance the plant by one fixed timestep."""
    if not cmd.is_finite():
        ev = WorldEvent(world.time, "command_rejected", {"reason": "non-finite command"})
        return replace(world, events=(ev,))
    dt = world.dt
    phys = world.physics
    world = replace(world, events=())
    if cmd.epm_command is not None:
        world = command_epm(world, cmd.epm_command)
    events = list(world.events)
    t_next = (world.step_index + 1) * dt

    # UAV: clamped velocity integration
    uav = world.uav
    v = np.asarray(cmd.uav_velocity, dtype=float)
    speed = math.sqrt(v @ v)
    if speed > uav.max_speed:
        v = v * (uav.max_speed / speed)
    dv = v - uav.velocity
    uav = replace(uav, velocity=v, pose=Pose(uav.pose.position + v * dt, uav.pose.yaw))

    # winch: first-order actuator, length clamped to the drum
    winch = world.winch
    if winch.tau > 0:
        rate = cmd.winch_rate + (winch.rate - cmd.winch_rate) * math.exp(-dt / winch.tau)
    else:
        rate = cmd.winch_rate
    length = winch.deployed_length + rate * dt
    if length <= 0.0 or length >= winch.max_length:
        length = min(max(length, 0.0), winch.max_length)
        rate = 0.0
    winch = replace(winch, deployed_length=length, rate=rate)

    head, ugv = world.head, world.ugv
    winch_warned = world.winch_warned
    if cmd.winch_rate != 0.0 and not head.attached and not world.winch.stowed:
        if not winch_warned:
            events.append(WorldEvent(t_next, "winch_free_head", {"rate": cmd.winch_rate}))
            winch_warned = True
    elif cmd.winch_rate == 0.0:
        winch_warned = False

    anchor = anchor_world(uav, winch)
    L = winch.deployed_length
    Lp = max(L, MIN_PENDULUM_LENGTH)

    # pendulum swing (skipped while the head rests on something)
    swing, swing_rate = head.swing, head.swing_rate
    if not head.resting:
        swing_rate = swing_rate - dv[:2] / Lp
        if phys.swing_noise > 0:
            rng = np.random.default_rng([world.rng_seed, world.step_index])
            swing_rate = swing_rate + phys.swing_noise * math.sqrt(dt) * rng.standard_normal(2)
        omega = math.sqrt(phys.gravity / Lp)
        swing, swing_rate = _critically_damped(swing, swing_rate, omega, dt)
        swing = np.clip(swing, -MAX_SWING, MAX_SWING)
    p_free = anchor + L * swing_direction(swing)

    taut_warned = world.taut_warned
    release_swing = world.release_swing
    off = attach_offset(ugv, head)
    if head.attached:
        if ugv.grounded:
            dist = float(np.linalg.norm(attach_point(ugv, head) - anchor))
            if L < dist - 1e-9:
                # tether shorter than the straight line: lift off
                swing = _swing_from_vector(attach_point(ugv, head) - anchor)
                swing_rate = np.zeros(2)
                p_free = anchor + L * swing_direction(swing)
                ugv = replace(ugv, grounded=False, pose=Pose(p_free - off, ugv.pose.yaw, ugv.pose.up_flag),
                              track_speeds=np.zeros(2))
                head = replace(head, position=p_free, swing=swing, swing_rate=swing_rate, resting=False)
                events.append(WorldEvent(t_next, "liftoff", {}))
            else:
                moved = _drive(world, ugv, cmd, dt)
                if float(np.linalg.norm(attach_point(moved, head) - anchor)) > L + 1e-9:
                    if not taut_warned:
                        events.append(WorldEvent(t_next, "tether_taut", {"length": L}))
                        taut_warned = True
                    moved = replace(ugv, track_speeds=np.zeros(2))
                else:
                    taut_warned = False
                ugv = moved
                head = replace(head, position=attach_point(ugv, head), swing=swing, swing_rate=np.zeros(2),
                               resting=True)
        else:
            bottom = p_free - off
            g = _ground(world.terrain, bottom[:2])
            if bottom[2] < g:
                up = swing_angle(swing) <= phys.flip_threshold
                bottom = np.array([bottom[0], bottom[1], g])
                ugv = replace(ugv, grounded=True, vz=0.0, pose=Pose(bottom, ugv.pose.yaw, up))
                head = replace(head, position=bottom + off, swing=swing, swing_rate=np.zeros(2), resting=True)
                events.append(WorldEvent(t_next, "touchdown", {"upright": up, "swing": swing_angle(swing)}))
            else:
                ugv = replace(ugv, pose=Pose(bottom, ugv.pose.yaw, ugv.pose.up_flag))
                head = replace(head, position=p_free, swing=swing, swing_rate=swing_rate, resting=False)
    else:
        if not ugv.grounded:
            vz = ugv.vz - phys.gravity * dt
            pos = ugv.pose.position + np.array([0.0, 0.0, vz * dt])
            g = _ground(world.terrain, pos[:2])
            if pos[2] <= g:
                pos[2] = g
                up = release_swing <= phys.flip_threshold
                ugv = replace(ugv, grounded=True, vz=0.0, pose=Pose(pos, ugv.pose.yaw, up))
                events.append(WorldEvent(t_next, "ugv_landed", {"upright": up}))
            else:
                ugv = replace(ugv, vz=vz, pose=Pose(pos, ugv.pose.yaw, ugv.pose.up_flag))
        else:
            ugv = _drive(world, ugv, cmd, dt)
        if head.resting:
            rest = head.position
            if L < float(np.linalg.norm(rest - anchor)) - 1e-9:
                swing = _swing_from_vector(rest - anchor)
                head = replace(head, position=anchor + L * swing_direction(swing), swing=swing,
                               swing_rate=np.zeros(2), resting=False)
            else:
                z = _head_support(world, ugv, rest[:2])
                rest = np.array([rest[0], rest[1], z])
                if float(np.linalg.norm(rest - anchor)) <= L + 1e-9:
                    head = replace(head, position=rest)
                else:
                    # support pushing past the anchor's reach: the tether holds the head instead
                    head = replace(head, position=p_free, swing=swing, swing_rate=np.zeros(2), resting=False)
        else:
            support = _head_support(world, ugv, p_free[:2])
            reach = float(np.linalg.norm(np.array([p_free[0], p_free[1], support]) - anchor))
            if p_free[2] < support and reach <= L + 1e-9:
                head = replace(head, position=np.array([p_free[0], p_free[1], support]), swing=swing,
                               swing_rate=np.zeros(2), resting=True)
            else:
                head = replace(head, position=p_free, swing=swing, swing_rate=swing_rate)

    ugv = _integrate_arms(ugv, cmd.arm_rates, dt)
    out = replace(world, uav=uav, winch=winch, head=head, ugv=ugv, step_index=world.step_index + 1,
                  events=tuple(events), winch_warned=winch_warned, taut_warned=taut_warned,
                  release_swing=release_swing)
    if head.epm_on and not head.attached:
        out = _try_capture(out, list(out.events))
    return out


def ugv_self_right(world: WorldState) -> WorldState:
    """Scripted arm sweep that returns a flipped, grounded UGV to upright.

    Both arms swing through a full turn in ``SELF_RIGHT_DURATION`` seconds; the
    maneuver always succeeds without a payload.
    """
    ugv = world.ugv
    if not ugv.grounded:
        raise ValueError("self-righting requires the UGV on the ground")
    if ugv.pose.up_flag:
        return world
    if ugv.carrying_payload:
        raise SelfRightRefused("payload blocks the arm sweep; drop it before self-righting")
    n = int(round(SELF_RIGHT_DURATION / world.dt))
    sweep = 2 * math.pi / SELF_RIGHT_DURATION
    events: list[WorldEvent] = []
    for i in range(n):
        rate = sweep if i < n // 2 else -sweep
        world = step_world(world, Commands(arm_rates=(rate, -rate)))
        events.extend(world.events)
    ugv = world.ugv
    ugv = replace(ugv, arm_angles=np.zeros(2), pose=Pose(ugv.pose.position, ugv.pose.yaw, True))
    events.append(WorldEvent(world.time, "self_righted", {"steps": n}))
    return replace(world, ugv=ugv, events=tuple(events))


def stowed_world(terrain: Terrain, uav_position, *, dt: float = 0.01, yaw: float = 0.0, seed: int = 0,
                 uav: dict | None = None, winch: dict | None = None, head: dict | None = None,
                 ugv: dict | None = None, physics: Physics | None = None) -> WorldState:
    """World with the UGV latched to a fully retracted tether under the UAV."""
    u = UavState(Pose(uav_position, yaw), **(uav or {}))
    w = WinchState(**(winch or {}))
    h = TetherHeadState(position=np.zeros(3), **(head or {}))
    g = UgvState(Pose(np.zeros(3), yaw), **(ugv or {}))
    a = anchor_world(u, w)
    h = replace(h, position=a.copy(), attached=True, epm_on=True)
    g = replace(g, pose=Pose(a - attach_offset(g, h), yaw), grounded=False)
    return WorldState(dt=dt, terrain=terrain, uav=u, winch=w, head=h, ugv=g, rng_seed=seed,
                      physics=physics or Physics())
