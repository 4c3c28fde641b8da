"""Terrain-adaptive flipper arm angles for the tracked UGV."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..perception.geometry import DegenerateInputError, fit_plane
from ..sensors import PointCloud
from ..world import UgvState, wrap_angle

log = logging.getLogger(__name__)

DEFAULT_ARMS = (0.0, 0.0)


@dataclass(frozen=True)
class ArmCommand:
    front_angle: float
    rear_angle: float
    restricted: bool = False


def _limit(a: float, restricted: bool) -> float:
    if restricted:
        return min(max(a, 0.0), math.pi / 2)
    return wrap_angle(a)


def compute_arm_angles(terrain_patch: PointCloud, ugv: UgvState, lookahead: float = 0.1,
                       slope_tolerance: float = 0.05, default: tuple[float, float] = DEFAULT_ARMS) -> ArmCommand:
    """Arm angles from the tallest nearby peak and the local pitch.

    ``terrain_patch`` is in the UGV frame with the origin at the bottom of the
    front axle, x forward and z up. The front arm rises by
    ``atan2(peak, lookahead) + slope``; the rear arm only moves on descents.
    A payload restricts both arms to [0, pi/2].
    """
    if not lookahead > 0:
        raise ValueError("lookahead must be positive")
    restricted = ugv.carrying_payload
    pts = terrain_patch.points
    if len(pts) == 0:
        log.warning("empty terrain patch; holding default arm angles")
        return ArmCommand(_limit(default[0], restricted), _limit(default[1], restricted), restricted)
    ahead = pts[(pts[:, 0] >= 0) & (pts[:, 0] <= lookahead)]
    peak = max(0.0, float(ahead[:, 2].max())) if len(ahead) else 0.0
    try:
        n = fit_plane(pts).normal
        slope = math.atan2(-n[0], n[2])
    except DegenerateInputError:
        slope = 0.0
    front = default[0] + math.atan2(peak, lookahead) + slope
    rear = default[1] - slope if slope < -slope_tolerance else default[1]
    return ArmCommand(_limit(front, restricted), _limit(rear, restricted), restricted)


def arm_patch(terrain, ugv: UgvState, lookahead: float = 0.1, spacing: float = 0.02) -> PointCloud:
    """Sample the heightfield around the front of the UGV into the arm frame."""
    c, s = math.cos(ugv.pose.yaw), math.sin(ugv.pose.yaw)
    front = ugv.pose.position[:2] + (ugv.length / 2) * np.array([c, s])
    xs = np.arange(-0.1, lookahead + 0.1 + 1e-9, spacing)
    ys = np.arange(-ugv.width / 2, ugv.width / 2 + 1e-9, spacing)
    X, Y = np.meshgrid(xs, ys)
    wx = front[0] + c * X - s * Y
    wy = front[1] + s * X + c * Y
    z = terrain.sample(wx, wy) - ugv.pose.position[2]
    ok = np.isfinite(z)
    return PointCloud(np.column_stack([X[ok], Y[ok], z[ok]]), "ugv")
