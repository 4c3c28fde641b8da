"""Synthetic downward depth camera and winch encoder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter

from .world import Pose, Terrain, UgvState, WinchState, WorldState, rot_z

# camera frame: x right, y down (image rows), z along the optical axis (world -z)
_CAM_FLIP = np.diag([1.0, -1.0, -1.0])
# half-widths (in grid corners) of the max-height windows used for safe ray advances
_SAFE_WINDOWS = (2, 3, 5, 9, 17, 33)


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 160
    height: int = 120
    fx: float = 120.0
    fy: float = 120.0
    cx: float = 79.5
    cy: float = 59.5
    max_range: float = 10.0
    min_range: float = 0.05

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")

    @classmethod
    def scaled(cls, width: int, height: int, hfov_ratio: float = 2.0 / 3.0, **kw) -> CameraIntrinsics:
        """Intrinsics with the default field of view at another resolution."""
        f = (width / 2) / hfov_ratio
        return cls(width, height, f, f, (width - 1) / 2, (height - 1) / 2, **kw)


@dataclass(frozen=True, eq=False)
class DepthImage:
    intrinsics: CameraIntrinsics
    depths: np.ndarray  # (height, width); NaN = no return
    camera_pose: Pose


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray  # (n, 3)
    frame: str = "world"
    organized_index: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite points")
        object.__setattr__(self, "points", pts)
        if self.frame not in ("camera", "world", "ugv"):
            raise ValueError(f"unknown frame tag {self.frame!r}")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, idx) -> PointCloud:
        oi = None if self.organized_index is None else self.organized_index[idx]
        return PointCloud(self.points[idx], self.frame, oi)


@dataclass(frozen=True)
class EncoderReading:
    ticks: int
    cpr: int
    drum_radius: float


def camera_rotation(pose: Pose) -> np.ndarray:
    """Camera-to-world rotation for a downward camera at ``pose``."""
    return rot_z(pose.yaw) @ _CAM_FLIP


@lru_cache(maxsize=8)
def _pixel_rays(intr: CameraIntrinsics) -> np.ndarray:
    u, v = np.meshgrid(np.arange(intr.width, dtype=float), np.arange(intr.height, dtype=float))
    rays = np.stack([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, np.ones_like(u)], axis=-1)
    rays = rays.reshape(-1, 3)
    rays.setflags(write=False)
    return rays


def _max_grids(terrain: Terrain) -> list[np.ndarray]:
    cached = terrain.__dict__.get("_max_grids")
    if cached is None:
        cached = [maximum_filter(terrain.heights, size=2 * w + 1, mode="nearest") for w in _SAFE_WINDOWS]
        terrain.__dict__["_max_grids"] = cached
    return cached


def _ray_terrain(terrain: Terrain, origin: np.ndarray, dirs: np.ndarray, t_min: float, t_max) -> np.ndarray:
    """Smallest depth t with origin + t*dir on or below the heightfield (NaN if none).

    ``dirs`` all have z = -1, so t is the vertical drop and also the camera z-depth.
    ``t_max`` may be per ray.
    """
    n = len(dirs)
    out = np.full(n, np.nan)
    oz = origin[2]
    cell = terrain.cell_size
    if terrain.zmax - terrain.zmin < 1e-12:
        t = np.full(n, oz - terrain.zmax)
        x = origin[0] + t * dirs[:, 0]
        y = origin[1] + t * dirs[:, 1]
        x0, x1, y0, y1 = terrain.extent
        ok = (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1) & (t >= t_min) & (t <= t_max)
        out[ok] = t[ok]
        return out

    # restrict each ray to the slab between the global extreme heights and to the grid rectangle
    lo = np.full(n, max(t_min, oz - terrain.zmax))
    hi = np.minimum(np.broadcast_to(np.asarray(t_max, dtype=float), (n,)), oz - terrain.zmin)
    x0, x1, y0, y1 = terrain.extent
    for k, (a, b) in enumerate(((x0, x1), (y0, y1))):
        d = dirs[:, k]
        o = origin[k]
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (a - o) / d
            tb = (b - o) / d
        t_in = np.where(d != 0, np.minimum(ta, tb), np.where((o >= a) & (o <= b), -np.inf, np.inf))
        t_out = np.where(d != 0, np.maximum(ta, tb), np.where((o >= a) & (o <= b), np.inf, -np.inf))
        lo = np.maximum(lo, t_in)
        hi = np.minimum(hi, t_out)
    idx = np.nonzero(lo <= hi)[0]
    if idx.size == 0:
        return out

    mgrids = _max_grids(terrain)
    dxy = np.hypot(dirs[:, 0], dirs[:, 1])
    ox, oy = terrain.origin
    rows, cols = terrain.rows, terrain.cols
    safe_hs = [(w - 1) * cell for w in _SAFE_WINDOWS]
    fine_h = 0.5 * cell

    t = lo[idx]
    t_prev = t.copy()
    d = dirs[idx]
    hxy = dxy[idx]
    tmax = hi[idx]
    found_lo = np.empty(0)
    found_hi = np.empty(0)
    found_idx = np.empty(0, dtype=np.intp)
    for _ in range(10000):
        if idx.size == 0:
            break
        x = origin[0] + t * d[:, 0]
        y = origin[1] + t * d[:, 1]
        z = oz - t
        f = z - terrain.sample(x, y)
        f = np.where(np.isnan(f), 1.0, f)
        hit = f <= 0
        if hit.any():
            found_idx = np.concatenate([found_idx, idx[hit]])
            found_lo = np.concatenate([found_lo, t_prev[hit]])
            found_hi = np.concatenate([found_hi, t[hit]])
        done = hit | (t >= tmax)
        keep = ~done
        idx, t, d, hxy, tmax, x, y, z = idx[keep], t[keep], d[keep], hxy[keep], tmax[keep], x[keep], y[keep], z[keep]
        if idx.size == 0:
            break
        c = np.clip(((x - ox) / cell).astype(np.intp), 0, cols - 1)
        r = np.clip(((y - oy) / cell).astype(np.intp), 0, rows - 1)
        with np.errstate(divide="ignore"):
            inv = np.where(hxy > 0, 1.0 / hxy, np.inf)
        safe = np.zeros(idx.size)
        for grid, h in zip(mgrids, safe_hs):
            bound = grid[r, c]
            safe = np.maximum(safe, np.where(z > bound, np.minimum(h * inv, z - bound), 0.0))
        fine = fine_h * inv
        step = np.maximum(safe, np.minimum(fine, z - terrain.zmin + cell))
        step = np.maximum(step, 1e-6)
        t_prev = t
        t = np.minimum(t + step, tmax)

    if found_idx.size:
        out[found_idx] = _refine_crossing(terrain, origin, dirs[found_idx], found_lo, found_hi)
    return out


def _refine_crossing(terrain: Terrain, origin, d, a, b, iters: int = 16, tol: float = 1e-9) -> np.ndarray:
    """Illinois false position on a bracket with f(a) > 0 >= f(b)."""

    def f(t, k):
        return (origin[2] - t) - terrain.sample(origin[0] + t * d[k, 0], origin[1] + t * d[k, 1])

    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    k = np.arange(len(a))
    fa, fb = f(a, k), f(b, k)
    side = np.zeros(len(a), dtype=np.int8)
    live = np.nonzero(np.abs(fb) >= tol)[0]
    for _ in range(iters):
        if live.size == 0:
            break
        al, bl, fal, fbl, sl = a[live], b[live], fa[live], fb[live], side[live]
        denom = fbl - fal
        c = np.where(denom != 0, bl - fbl * (bl - al) / np.where(denom != 0, denom, 1.0), 0.5 * (al + bl))
        c = np.clip(c, np.minimum(al, bl), np.maximum(al, bl))
        fc = f(c, live)
        below = fc <= 0
        b[live] = np.where(below, c, bl)
        fb[live] = np.where(below, fc, fbl)
        a[live] = np.where(below, al, c)
        # Illinois: halve the stale endpoint's value when the same side is kept twice
        fa[live] = np.where(below, np.where(sl == 1, 0.5 * fal, fal), fc)
        fb[live] = np.where(~below & (sl == -1), 0.5 * fb[live], fb[live])
        side[live] = np.where(below, 1, -1)
        live = live[np.abs(fb[live]) >= tol]
    return b


def _ray_box(origin, dirs, center, yaw, half) -> np.ndarray:
    rot = rot_z(-yaw)
    o = rot @ (origin - center)
    d = dirs @ rot.T
    t0 = np.full(len(d), -np.inf)
    t1 = np.full(len(d), np.inf)
    for k in range(3):
        dk = d[:, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (-half[k] - o[k]) / dk
            b = (half[k] - o[k]) / dk
        par = dk == 0
        inside = abs(o[k]) <= half[k]
        a = np.where(par, np.where(inside, -np.inf, np.inf), a)
        b = np.where(par, np.where(inside, np.inf, -np.inf), b)
        t0 = np.maximum(t0, np.minimum(a, b))
        t1 = np.minimum(t1, np.maximum(a, b))
    return np.where((t0 <= t1) & (t1 >= 0), np.maximum(t0, 0.0), np.nan)


def _ray_sphere(origin, dirs, center, radius) -> np.ndarray:
    oc = origin - center
    a = np.einsum("ij,ij->i", dirs, dirs)
    b = 2.0 * dirs @ oc
    c = oc @ oc - radius * radius
    disc = b * b - 4 * a * c
    with np.errstate(invalid="ignore"):
        t = (-b - np.sqrt(disc)) / (2 * a)
    return np.where(disc >= 0, t, np.nan)


def ugv_box(ugv: UgvState) -> tuple[np.ndarray, np.ndarray]:
    """Centre and half-extents of the chassis box."""
    half = np.array([ugv.length / 2, ugv.width / 2, ugv.height / 2])
    return ugv.pose.position + np.array([0.0, 0.0, ugv.height / 2]), half


def render_depth(world: WorldState, intrinsics: CameraIntrinsics, noise_std: float = 0.0,
                 seed: int | None = None, pose: Pose | None = None,
                 roi: tuple[int, int, int, int] | None = None) -> DepthImage:
    """Ray-cast the terrain, the UGV box and the tether head from the UAV camera.

    The head and a latched UGV are hidden while the tether is fully retracted
    (they sit inside the tether module bay). ``roi = (u0, v0, u1, v1)`` limits
    casting to a pixel window; everything outside it is reported as no-return.
    """
    pose = pose or world.uav.pose
    R = camera_rotation(pose)
    rays = _pixel_rays(intrinsics)
    sel = None
    if roi is not None:
        u0, v0, u1, v1 = roi
        u0, u1 = max(0, u0), min(intrinsics.width, u1)
        v0, v1 = max(0, v0), min(intrinsics.height, v1)
        uu, vv = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1))
        sel = (vv * intrinsics.width + uu).reshape(-1)
        rays = rays[sel]
    dirs = rays @ R.T
    o = pose.position
    lo, hi = intrinsics.min_range, intrinsics.max_range

    hidden = world.winch.stowed
    candidates = []
    if not (hidden and world.head.attached):
        c, half = ugv_box(world.ugv)
        candidates.append(_ray_box(o, dirs, c, world.ugv.pose.yaw, half))
    if not hidden:
        candidates.append(_ray_sphere(o, dirs, world.head.position, world.head.radius))
    nearest = np.full(len(dirs), np.nan)
    for tc in candidates:
        nearest = np.fmin(nearest, np.where((tc >= lo) & (tc <= hi), tc, np.nan))
    # terrain only matters where it is closer than the objects
    best = _ray_terrain(world.terrain, o, dirs, lo, np.where(np.isnan(nearest), hi, nearest))
    best = np.fmin(best, nearest)

    if noise_std > 0:
        rng = np.random.default_rng([world.rng_seed if seed is None else seed, world.step_index])
        noisy = best + noise_std * rng.standard_normal(best.shape)
        best = np.where(np.isfinite(best), np.clip(noisy, lo, hi), np.nan)
    if sel is not None:
        full = np.full(intrinsics.width * intrinsics.height, np.nan)
        full[sel] = best
        best = full
    depths = best.reshape(intrinsics.height, intrinsics.width)
    return DepthImage(intrinsics, depths, Pose(o.copy(), pose.yaw))


def depth_to_cloud(image: DepthImage, target_frame: str = "world") -> PointCloud:
    """Back-project every finite pixel through the pinhole model."""
    intr = image.intrinsics
    flat = image.depths.reshape(-1)
    idx = np.nonzero(np.isfinite(flat))[0]
    d = flat[idx]
    u = (idx % intr.width).astype(float)
    v = (idx // intr.width).astype(float)
    pts = np.column_stack([(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d])
    if target_frame == "world":
        pts = pts @ camera_rotation(image.camera_pose).T + image.camera_pose.position
    elif target_frame != "camera":
        raise ValueError(f"unsupported frame {target_frame!r}")
    return PointCloud(pts, target_frame, idx)


def project_points(points: np.ndarray, intrinsics: CameraIntrinsics, camera_pose: Pose) -> np.ndarray:
    """World points to (u, v, depth)."""
    pc = (np.asarray(points, dtype=float).reshape(-1, 3) - camera_pose.position) @ camera_rotation(camera_pose)
    z = pc[:, 2]
    u = intrinsics.fx * pc[:, 0] / z + intrinsics.cx
    v = intrinsics.fy * pc[:, 1] / z + intrinsics.cy
    return np.column_stack([u, v, z])


def read_encoder(winch: WinchState) -> EncoderReading:
    revs = winch.deployed_length / (2 * math.pi * winch.drum_radius)
    return EncoderReading(int(round(revs * winch.encoder_cpr)), winch.encoder_cpr, winch.drum_radius)


def length_from_encoder(reading: EncoderReading) -> float:
    return reading.ticks / reading.cpr * 2 * math.pi * reading.drum_radius


def tick_length(winch: WinchState) -> float:
    return 2 * math.pi * winch.drum_radius / winch.encoder_cpr


def save_cloud(path: str | Path, cloud: PointCloud) -> None:
    """Whitespace-delimited ``x y z`` per line."""
    np.savetxt(path, cloud.points, fmt="%.17g")


def load_cloud(path: str | Path, frame: str = "world") -> PointCloud:
    pts = np.loadtxt(path, ndmin=2)
    if pts.size == 0:
        pts = np.empty((0, 3))
    if pts.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {pts.shape[1]}")
    return PointCloud(pts, frame)
