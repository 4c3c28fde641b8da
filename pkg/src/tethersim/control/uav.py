"""UAV velocity commands: spline tracking and image-space alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sensors import CameraIntrinsics
from ..world import UavState, rot_z
from .bspline import BSpline, bspline_eval
from .pid import TRACKING_GAINS, PidGains, PidState, pid_step


@dataclass(frozen=True, eq=False)
class VelocityCommand:
    linear: np.ndarray
    yaw_rate: float = 0.0

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.linear))


def clamp_speed(v: np.ndarray, limit: float) -> np.ndarray:
    s = float(np.linalg.norm(v))
    return v * (limit / s) if s > limit else v


def track_trajectory(uav: UavState, spline: BSpline, t: float,
                     gains: tuple[PidGains, PidGains, PidGains] = (TRACKING_GAINS,) * 3,
                     states: tuple[PidState, PidState, PidState] | None = None,
                     dt: float = 0.05) -> tuple[VelocityCommand, tuple[PidState, PidState, PidState]]:
    """Spline velocity feedforward plus per-axis PID on the position error."""
    ref = bspline_eval(spline, min(max(t, 0.0), spline.duration))
    states = states or (PidState(), PidState(), PidState())
    err = ref.position - uav.pose.position
    out = [pid_step(s, g, float(e), dt) for s, g, e in zip(states, gains, err)]
    v = ref.velocity + np.array([o.output for o in out])
    return VelocityCommand(clamp_speed(v, uav.max_speed)), tuple(o.state for o in out)


def hold_position(uav: UavState, target, kp: float = 1.0) -> VelocityCommand:
    v = kp * (np.asarray(target, dtype=float) - uav.pose.position)
    return VelocityCommand(clamp_speed(v, uav.max_speed))


def servo_alignment(target_px, intrinsics: CameraIntrinsics, altitude: float, gain: float = 1.0,
                    yaw: float = 0.0) -> VelocityCommand:
    """Lateral velocity that drives an image target toward the principal point.

    The normalised pixel error times altitude is the ground offset, so the loop
    is a first-order decay of that offset at rate ``gain``.
    """
    if not altitude > 0:
        raise ValueError(f"altitude must be positive, got {altitude}")
    ex = (target_px[0] - intrinsics.cx) / intrinsics.fx
    ey = (target_px[1] - intrinsics.cy) / intrinsics.fy
    # camera y points opposite to world y for a downward camera
    v = rot_z(yaw) @ np.array([ex, -ey, 0.0])
    return VelocityCommand(gain * altitude * v)


def pixel_error(target_px, intrinsics: CameraIntrinsics) -> float:
    return math.hypot(target_px[0] - intrinsics.cx, target_px[1] - intrinsics.cy)
