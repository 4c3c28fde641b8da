from .arms import ArmCommand, compute_arm_angles
from .bspline import BSpline, bspline_eval, bspline_from_waypoints, timed_spline
from .pid import TRACKING_GAINS, WINCH_GAINS, PidGains, PidOutput, PidState, pid_step, winch_rate_controller
from .uav import VelocityCommand, servo_alignment, track_trajectory

__all__ = [
    "TRACKING_GAINS",
    "WINCH_GAINS",
    "ArmCommand",
    "BSpline",
    "PidGains",
    "PidOutput",
    "PidState",
    "VelocityCommand",
    "bspline_eval",
    "bspline_from_waypoints",
    "compute_arm_angles",
    "pid_step",
    "servo_alignment",
    "timed_spline",
    "track_trajectory",
    "winch_rate_controller",
]
