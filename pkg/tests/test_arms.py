from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tethersim.control.arms import arm_patch, compute_arm_angles
from tethersim.sensors import PointCloud
from tethersim.world import Pose, Terrain, UgvState

UGV = UgvState(Pose(np.zeros(3)))
LOADED = UgvState(Pose(np.zeros(3)), carrying_payload=True, payload_mass=1.0)


def flat_patch():
    xs, ys = np.meshgrid(np.linspace(-0.2, 0.2, 21), np.linspace(-0.15, 0.15, 7))
    return np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])


def test_flat_patch_keeps_defaults():
    cmd = compute_arm_angles(PointCloud(flat_patch(), "ugv"), UGV)
    assert (cmd.front_angle, cmd.rear_angle) == (0.0, 0.0)


def test_peak_ahead_raises_front_arm():
    pts = flat_patch()
    # matching bumps at x = +-0.1 keep the fitted plane level
    for x in (0.1, -0.1):
        pts[np.isclose(pts[:, 0], x), 2] = 0.04
    cmd = compute_arm_angles(PointCloud(pts, "ugv"), UGV, lookahead=0.1)
    assert math.degrees(cmd.front_angle) == pytest.approx(21.8, abs=0.05)
    assert cmd.rear_angle == 0.0


def test_restricted_mode_clamps_to_ninety():
    cmd = compute_arm_angles(PointCloud(flat_patch(), "ugv"), LOADED, default=(math.radians(120), 0.0))
    assert cmd.restricted and cmd.front_angle == pytest.approx(math.pi / 2)


def test_empty_patch_falls_back(caplog):
    cmd = compute_arm_angles(PointCloud(np.zeros((0, 3)), "ugv"), UGV, default=(0.2, 0.1))
    assert (cmd.front_angle, cmd.rear_angle) == pytest.approx((0.2, 0.1))
    assert "empty" in caplog.text


def test_descent_moves_rear_arm():
    pts = flat_patch()
    pts[:, 2] = -0.3 * pts[:, 0]
    cmd = compute_arm_angles(PointCloud(pts, "ugv"), UGV)
    assert cmd.rear_angle > 0


@given(st.lists(st.tuples(st.floats(-0.3, 0.3), st.floats(-0.2, 0.2), st.floats(-0.5, 0.5)), max_size=40),
       st.floats(-4, 4), st.floats(-4, 4))
def test_restricted_angles_stay_in_range(pts, f0, r0):
    cmd = compute_arm_angles(PointCloud(np.array(pts).reshape(-1, 3), "ugv"), LOADED, default=(f0, r0))
    for a in (cmd.front_angle, cmd.rear_angle):
        assert 0.0 <= a <= math.pi / 2


def test_arm_patch_samples_terrain():
    t = Terrain.ramp(4.0, 4.0, 0.05, 0.2)
    ugv = UgvState(Pose([2.0, 2.0, t.sample(2.0, 2.0)]))
    patch = arm_patch(t, ugv)
    assert patch.frame == "ugv" and len(patch) > 0
    assert np.allclose(patch.points[:, 2], 0.2 * (patch.points[:, 0] + ugv.length / 2), atol=1e-9)
