from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import pinhole_project

from tethersim.sensors import (
    CameraIntrinsics,
    DepthImage,
    EncoderReading,
    PointCloud,
    camera_rotation,
    depth_to_cloud,
    length_from_encoder,
    load_cloud,
    project_points,
    read_encoder,
    render_depth,
    save_cloud,
    tick_length,
)
from tethersim.world import Commands, Pose, Terrain, WinchState, add_box, step_world, stowed_world

# odd-sized image so the principal ray hits a pixel centre
CENTRED = CameraIntrinsics(41, 31, 30.0, 30.0, 20.0, 15.0, 10.0, 0.05)


def test_flat_ground_at_five_metres():
    w = stowed_world(Terrain.flat(20.0, 20.0, 0.1), (10.0, 10.0, 5.0))
    img = render_depth(w, CameraIntrinsics())
    assert img.depths.shape == (120, 160)
    assert np.allclose(img.depths, 5.0, atol=1e-9, rtol=0)


def test_box_under_camera_centre():
    t = add_box(Terrain.flat(20.0, 20.0, 0.05), (10.0, 10.0), (1.0, 1.0), 0.1)
    w = stowed_world(t, (10.0, 10.0, 3.0))
    img = render_depth(w, CENTRED)
    assert img.depths[15, 20] == pytest.approx(3.0 - 0.1, abs=1e-9)


def test_out_of_range_gives_no_returns():
    w = stowed_world(Terrain.flat(40.0, 40.0, 0.2), (20.0, 20.0, 12.0))
    assert np.isnan(render_depth(w, CameraIntrinsics()).depths).all()


def test_principal_pixel_back_projects_to_axis():
    depths = np.full((31, 41), np.nan)
    depths[15, 20] = 2.0
    cloud = depth_to_cloud(DepthImage(CENTRED, depths, Pose(np.zeros(3))), "camera")
    assert np.allclose(cloud.points, [[0.0, 0.0, 2.0]])


def test_unit_tangent_pixel():
    intr = CameraIntrinsics(300, 100, 100.0, 100.0, 50.0, 50.0)
    depths = np.full((100, 300), np.nan)
    depths[50, 150] = 2.0
    cloud = depth_to_cloud(DepthImage(intr, depths, Pose(np.zeros(3))), "camera")
    assert np.allclose(cloud.points, [[2.0, 0.0, 2.0]])


def _rough_world(seed: int, yaw: float = 0.3):
    t = Terrain.procedural(8.0, 8.0, 0.1, seed, amplitude=0.4)
    return stowed_world(t, (4.0, 4.0, 3.0), yaw=yaw)


@pytest.mark.parametrize("seed", range(3))
def test_back_projection_round_trip(seed):
    w = _rough_world(seed)
    intr = CameraIntrinsics.scaled(64, 48)
    img = render_depth(w, intr)
    cloud = depth_to_cloud(img, "world")
    uvd = project_points(cloud.points, intr, img.camera_pose)
    flat = img.depths.reshape(-1)
    idx = cloud.organized_index
    assert np.allclose(uvd[:, 2], flat[idx], atol=1e-9, rtol=0)
    assert np.allclose(uvd[:, 0], idx % intr.width, atol=1e-9)
    assert np.allclose(uvd[:, 1], idx // intr.width, atol=1e-9)
    # independent pinhole check on the camera-frame coordinates
    R = camera_rotation(img.camera_pose)
    for p, i in zip(cloud.points[::97], idx[::97]):
        u, v, d = pinhole_project(R.T @ (p - img.camera_pose.position), intr.fx, intr.fy, intr.cx, intr.cy)
        assert (u, v, d) == pytest.approx((i % intr.width, i // intr.width, flat[i]), abs=1e-9)


def test_render_is_deterministic_with_noise():
    w = _rough_world(4)
    intr = CameraIntrinsics.scaled(48, 36)
    a = render_depth(w, intr, noise_std=0.01, seed=7)
    b = render_depth(w, intr, noise_std=0.01, seed=7)
    assert a.depths.tobytes() == b.depths.tobytes()
    c = render_depth(w, intr, noise_std=0.01, seed=8)
    assert not np.array_equal(a.depths, c.depths)


def _slab(origin, d, lo, hi):
    t0, t1 = -math.inf, math.inf
    for k in range(3):
        if abs(d[k]) < 1e-15:
            if not lo[k] <= origin[k] <= hi[k]:
                return math.inf
            continue
        a, b = (lo[k] - origin[k]) / d[k], (hi[k] - origin[k]) / d[k]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    return t0 if t0 <= t1 and t0 > 0 else math.inf


def _sphere(origin, d, c, r):
    oc = origin - c
    b = oc @ d
    disc = b * b - (d @ d) * (oc @ oc - r * r)
    if disc < 0:
        return math.inf
    t = (-b - math.sqrt(disc)) / (d @ d)
    return t if t > 0 else math.inf


def test_depth_never_behind_an_object():
    w = stowed_world(Terrain.procedural(6.0, 6.0, 0.05, 2, amplitude=0.2), (3.0, 3.0, 2.5))
    for _ in range(400):
        w = step_world(w, Commands(winch_rate=0.6))
        if w.ugv.grounded:
            break
    # free the head a little above the UGV so both primitives are visible
    head = replace(w.head, attached=False, epm_on=False, resting=False,
                   position=w.ugv.pose.position + np.array([0.25, 0.1, 0.4]))
    w = replace(w, head=head)
    intr = CameraIntrinsics.scaled(80, 60)
    img = render_depth(w, intr)
    R = camera_rotation(w.uav.pose)
    o = w.uav.pose.position
    ugv = w.ugv
    lo = ugv.pose.position - np.array([ugv.length / 2, ugv.width / 2, 0.0])
    hi = ugv.pose.position + np.array([ugv.length / 2, ugv.width / 2, ugv.height])
    hits = 0
    for v in range(intr.height):
        for u in range(intr.width):
            ray = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
            d = R @ ray  # z-depth parameterisation: depth == t
            t = min(_slab(o, d, lo, hi), _sphere(o, d, head.position, head.radius))
            if math.isfinite(t):
                hits += 1
                assert img.depths[v, u] <= t + 1e-9
    assert hits > 20


def test_encoder_one_revolution():
    w = WinchState(deployed_length=2 * math.pi * 0.02, drum_radius=0.02, encoder_cpr=4096)
    assert read_encoder(w).ticks == 4096
    assert read_encoder(WinchState(deployed_length=0.0)).ticks == 0


@pytest.mark.parametrize("ticks, length", [(4096, 0.12566), (0, 0.0), (2048, 0.06283)])
def test_length_from_ticks(ticks, length):
    assert length_from_encoder(EncoderReading(ticks, 4096, 0.02)) == pytest.approx(length, abs=1e-5)


@given(st.floats(0.0, 10.0), st.integers(16, 8192), st.floats(0.005, 0.1))
def test_encoder_round_trip_within_a_tick(length, cpr, radius):
    w = WinchState(deployed_length=length, max_length=10.0, drum_radius=radius, encoder_cpr=cpr)
    assert abs(length_from_encoder(read_encoder(w)) - length) <= tick_length(w) + 1e-12


def test_cloud_file_round_trip(tmp_path):
    pts = np.random.default_rng(0).normal(size=(50, 3))
    save_cloud(tmp_path / "c.xyz", PointCloud(pts))
    back = load_cloud(tmp_path / "c.xyz")
    assert np.array_equal(back.points, pts)


def test_cloud_rejects_non_finite():
    with pytest.raises(ValueError):
        PointCloud(np.array([[0.0, np.inf, 0.0]]))
