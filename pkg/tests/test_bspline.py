from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.interpolate import BSpline as ScipyBSpline
from scipy.spatial import ConvexHull

from tethersim.control.bspline import BSpline, bspline_eval, bspline_from_waypoints, timed_spline


def random_cubic(seed: int, n_min: int = 4, n_max: int = 10) -> BSpline:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    return bspline_from_waypoints(rng.uniform(-5, 5, size=(n, 3)), 3, float(rng.uniform(0.5, 20)))


def test_two_waypoints_give_a_segment():
    s = bspline_from_waypoints([[0, 0, 0], [2, 0, 0]], degree=3, duration=2.0)
    assert s.degree == 1
    mid = bspline_eval(s, 1.0)
    assert np.allclose(mid.position, [1, 0, 0]) and np.allclose(mid.velocity, [1, 0, 0])


def test_collinear_control_points_stay_on_line():
    cp = np.outer(np.array([0, 0.3, 1.1, 2.0, 2.2, 4.0]), [1.0, 2.0, -0.5]) + [1, 1, 1]
    s = bspline_from_waypoints(cp, 3, 3.0)
    d = (cp[-1] - cp[0]) / np.linalg.norm(cp[-1] - cp[0])
    for t in np.linspace(0, 3, 61):
        v = bspline_eval(s, t).position - cp[0]
        assert np.linalg.norm(v - (v @ d) * d) < 1e-9


def test_clamped_endpoints():
    s = random_cubic(5)
    assert np.allclose(bspline_eval(s, 0.0).position, s.control_points[0], atol=1e-9, rtol=0)
    assert np.allclose(bspline_eval(s, s.duration).position, s.control_points[-1], atol=1e-9, rtol=0)


def test_out_of_domain_is_clamped(caplog):
    s = random_cubic(2)
    assert np.allclose(bspline_eval(s, -1.0).position, s.control_points[0])
    assert "clamped" in caplog.text


def test_invalid_splines():
    with pytest.raises(ValueError):
        BSpline(3, np.zeros((4, 3)), np.zeros(5), 1.0)
    with pytest.raises(ValueError):
        bspline_from_waypoints([[0, 0, 0]], 3, 1.0)


@given(st.integers(0, 100_000), st.floats(0, 1))
def test_matches_scipy_reference(seed, frac):
    s = random_cubic(seed)
    ref = ScipyBSpline(s.knots, s.control_points, s.degree)
    t = frac * s.duration
    out = bspline_eval(s, t)
    u = min(t / s.duration, 1.0)
    assert np.allclose(out.position, ref(u), atol=1e-9, rtol=0)
    assert np.allclose(out.velocity, ref.derivative()(u) / s.duration, atol=1e-9, rtol=1e-9)


@given(st.integers(0, 100_000))
def test_samples_inside_control_hull(seed):
    s = random_cubic(seed)
    hull = ConvexHull(s.control_points)
    pts = np.array([bspline_eval(s, t).position for t in np.linspace(0, s.duration, 50)])
    assert (pts @ hull.equations[:, :3].T + hull.equations[:, 3]).max() <= 1e-9


@given(st.integers(0, 100_000), st.floats(0.01, 0.99))
def test_velocity_matches_central_difference(seed, frac):
    s = random_cubic(seed)
    t = frac * s.duration
    h = 1e-6 * s.duration
    fd = (bspline_eval(s, t + h).position - bspline_eval(s, t - h).position) / (2 * h)
    v = bspline_eval(s, t).velocity
    assert np.linalg.norm(fd - v) <= 1e-6 * max(np.linalg.norm(v), 1e-3)


def test_timed_spline_starts_and_ends_at_rest():
    s = timed_spline([[0, 0, 2], [3, 1, 2], [4, 4, 3]], speed=1.0)
    assert np.allclose(bspline_eval(s, 0).velocity, 0, atol=1e-12)
    assert np.allclose(bspline_eval(s, s.duration).velocity, 0, atol=1e-12)
    peak = max(np.linalg.norm(bspline_eval(s, t).velocity) for t in np.linspace(0, s.duration, 201))
    assert peak == pytest.approx(1.0, rel=1e-6)
