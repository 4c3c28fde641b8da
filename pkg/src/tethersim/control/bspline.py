"""Clamped uniform B-spline trajectories evaluated with de Boor's algorithm."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BSpline:
    degree: int
    control_points: np.ndarray  # (n, 3)
    knots: np.ndarray  # clamped, over [0, 1]
    duration: float

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=float)
        kn = np.asarray(self.knots, dtype=float)
        if len(kn) != len(cp) + self.degree + 1:
            raise ValueError("knot count must equal control count + degree + 1")
        if np.any(np.diff(kn) < 0):
            raise ValueError("knots must be non-decreasing")
        if len(cp) < self.degree + 1:
            raise ValueError("need at least degree + 1 control points")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "knots", kn)


@dataclass(frozen=True)
class SplineSample:
    position: np.ndarray
    velocity: np.ndarray


def clamped_uniform_knots(n_ctrl: int, degree: int) -> np.ndarray:
    inner = n_ctrl - degree - 1
    mid = np.linspace(0.0, 1.0, inner + 2)[1:-1] if inner > 0 else np.zeros(0)
    return np.concatenate([np.zeros(degree + 1), mid, np.ones(degree + 1)])


def bspline_from_waypoints(waypoints, degree: int = 3, duration: float = 1.0) -> BSpline:
    """Approximating spline that uses the waypoints directly as control points."""
    cp = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(cp) < 2:
        raise ValueError("need at least two waypoints")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if not duration > 0:
        raise ValueError("duration must be positive")
    if len(cp) < degree + 1:
        log.warning("degree %d lowered to %d for %d waypoints", degree, len(cp) - 1, len(cp))
        degree = len(cp) - 1
    return BSpline(degree, cp, clamped_uniform_knots(len(cp), degree), float(duration))


def _span(knots: np.ndarray, degree: int, n_ctrl: int, u: float) -> int:
    if u >= knots[n_ctrl]:
        return n_ctrl - 1
    return int(np.searchsorted(knots, u, side="right") - 1)


def de_boor(knots: np.ndarray, ctrl: np.ndarray, degree: int, u: float) -> np.ndarray:
    k = _span(knots, degree, len(ctrl), u)
    d = [ctrl[j + k - degree].copy() for j in range(degree + 1)]
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = j + k - degree
            denom = knots[i + degree + 1 - r] - knots[i]
            a = 0.0 if denom == 0 else (u - knots[i]) / denom
            d[j] = (1.0 - a) * d[j - 1] + a * d[j]
    return d[degree]


def derivative_control_points(spline: BSpline) -> tuple[np.ndarray, np.ndarray]:
    """Control points and knots of d/du of the spline (degree p - 1)."""
    p, P, U = spline.degree, spline.control_points, spline.knots
    denom = U[p + 1:p + len(P)] - U[1:len(P)]
    Q = p * (P[1:] - P[:-1]) / np.where(denom > 0, denom, 1.0)[:, None]
    return Q, U[1:-1]


def bspline_eval(spline: BSpline, t: float) -> SplineSample:
    """Position and time-derivative at time ``t`` (clamped to [0, duration])."""
    if t < 0 or t > spline.duration:
        log.warning("t=%g outside [0, %g]; clamped", t, spline.duration)
        t = min(max(t, 0.0), spline.duration)
    u = t / spline.duration
    pos = de_boor(spline.knots, spline.control_points, spline.degree, u)
    if spline.degree == 0:
        return SplineSample(pos, np.zeros(3))
    Q, U = derivative_control_points(spline)
    if spline.degree == 1:
        k = _span(U, 0, len(Q), u)
        vel = Q[k]
    else:
        vel = de_boor(U, Q, spline.degree - 1, u)
    return SplineSample(pos, vel / spline.duration)


def timed_spline(waypoints, speed: float, degree: int = 3, min_duration: float = 0.5) -> BSpline:
    """Spline through a waypoint polygon that starts and ends at rest.

    End waypoints are doubled so the end velocities vanish; the duration is
    scaled so the sampled peak speed equals ``speed``.
    """
    wp = np.asarray(waypoints, dtype=float).reshape(-1, 3)
    if len(wp) == 1:
        wp = np.vstack([wp, wp])
    if len(wp) == 2:
        wp = np.vstack([wp[0], 0.5 * (wp[0] + wp[1]), wp[1]])
    cp = np.vstack([wp[:1], wp, wp[-1:]])
    unit = bspline_from_waypoints(cp, degree, 1.0)
    peak = max(float(np.linalg.norm(bspline_eval(unit, u).velocity)) for u in np.linspace(0.0, 1.0, 201))
    return bspline_from_waypoints(cp, degree, max(min_duration, peak / max(speed, 1e-6)))
