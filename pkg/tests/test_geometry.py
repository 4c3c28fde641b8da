from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import angle_deg, exhaustive_zone, svd_plane

from tethersim.perception.geometry import (
    DegenerateInputError,
    NavigabilityMask,
    NormalCloud,
    estimate_normals,
    find_deployment_zone,
    fit_plane,
    segment_navigable,
)
from tethersim.sensors import PointCloud


def grid(x0, x1, y0, y1, step, z=lambda x, y: 0.0 * x):
    xs, ys = np.meshgrid(np.arange(x0, x1 + 1e-9, step), np.arange(y0, y1 + 1e-9, step))
    return np.column_stack([xs.ravel(), ys.ravel(), z(xs.ravel(), ys.ravel())])


# ---------------------------------------------------------------- normals

def test_plane_normals_point_up():
    pts = grid(0, 0.45, 0, 0.45, 0.05)
    assert len(pts) == 100
    nc = estimate_normals(PointCloud(pts))
    assert nc.valid.all()
    assert np.allclose(nc.normals, [0.0, 0.0, 1.0], atol=1e-6)


def test_hemisphere_normals_are_radial():
    # near-uniform spiral sampling of the unit upper hemisphere
    n = 10_000
    i = np.arange(n) + 0.5
    z = 1 - i / n
    phi = i * math.pi * (3 - math.sqrt(5))
    r = np.sqrt(1 - z * z)
    v = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    nc = estimate_normals(PointCloud(v), k=12)
    assert nc.valid.all()
    worst = max(angle_deg(nrm, p) for nrm, p in zip(nc.normals, v))
    assert worst < 2.0


def test_too_few_points_are_invalid():
    nc = estimate_normals(PointCloud(np.array([[0, 0, 0], [1, 0, 0]], dtype=float)), k=3)
    assert not nc.valid.any()


@given(st.integers(0, 1000))
def test_valid_normals_are_unit_and_upward(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(300, 3)) * [1, 1, 0.3]
    nc = estimate_normals(PointCloud(pts), k=8, radius=0.6)
    n = nc.normals[nc.valid]
    assert np.allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-6)
    assert (n[:, 2] >= 0).all()


# ---------------------------------------------------------------- segmentation

def _normals(rows):
    n = np.asarray(rows, dtype=float)
    return NormalCloud(n, np.ones(len(n), dtype=bool), PointCloud(np.zeros((len(n), 3))))


def test_segmentation_examples():
    up = _normals([[0, 0, 1]] * 4)
    assert segment_navigable(up, math.radians(30)).mask.all()
    wall = _normals([[1, 0, 0]] * 3)
    assert not segment_navigable(wall, math.radians(30)).mask.any()
    incline = _normals([[math.sin(math.radians(20)), 0, math.cos(math.radians(20))]])
    assert segment_navigable(incline, math.radians(30)).mask.all()
    assert not segment_navigable(incline, math.radians(15)).mask.any()


def test_invalid_normals_are_not_navigable():
    nc = NormalCloud(np.array([[0, 0, 1.0], [np.nan] * 3]), np.array([True, False]), PointCloud(np.zeros((2, 3))))
    assert segment_navigable(nc).mask.tolist() == [True, False]


@given(st.integers(0, 1000), st.floats(0.01, 1.5), st.floats(0.01, 1.5))
def test_segmentation_monotone_in_threshold(seed, a, b):
    lo, hi = sorted((a, b))
    n = np.random.default_rng(seed).normal(size=(100, 3))
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    n[:, 2] = np.abs(n[:, 2])
    nc = _normals(n)
    m_lo, m_hi = segment_navigable(nc, lo).mask, segment_navigable(nc, hi).mask
    assert not np.any(m_lo & ~m_hi)


# ---------------------------------------------------------------- plane fit

def test_exact_horizontal_plane():
    p = fit_plane(grid(0, 1, 0, 1, 0.25))
    assert np.allclose(p.normal, [0, 0, 1]) and p.offset == pytest.approx(0.0) and p.rms_residual < 1e-12


def test_exact_inclined_plane():
    p = fit_plane(grid(0, 1, 0, 1, 0.25, lambda x, y: 0.5 * x + 1.0))
    expect = np.array([-0.5, 0.0, 1.0]) / math.sqrt(1.25)
    assert np.allclose(p.normal, expect, atol=1e-12)
    assert p.rms_residual < 1e-9


@pytest.mark.parametrize("pts", [np.zeros((2, 3)), np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2.0]])])
def test_degenerate_planes(pts):
    with pytest.raises(DegenerateInputError):
        fit_plane(pts)


def test_ransac_ignores_outliers():
    rng = np.random.default_rng(3)
    pts = grid(0, 2, 0, 2, 0.1, lambda x, y: 0.2 * y)
    pts[:, 2] += rng.normal(0, 0.003, len(pts))
    junk = rng.uniform([0, 0, 1], [2, 2, 2], size=(100, 3))
    p = fit_plane(np.vstack([pts, junk]), method="ransac", iterations=200, inlier_tol=0.02, seed=1)
    assert angle_deg(p.normal, [0, -0.2, 1]) < 0.5
    assert p.inlier_count >= len(pts) - 5


@given(st.integers(0, 10_000))
def test_least_squares_agrees_with_svd(seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(60, 3)) * [1.0, 0.7, 0.05]
    pts = pts @ np.linalg.qr(rng.normal(size=(3, 3)))[0].T
    plane = fit_plane(pts)
    n, d = svd_plane(pts)
    assert angle_deg(plane.normal, n) < 1e-6
    assert plane.offset == pytest.approx(d, abs=1e-9)
    assert abs(np.linalg.norm(plane.normal) - 1) < 1e-9


# ---------------------------------------------------------------- deployment zone

def _search(pts, entry, **kw):
    cloud = PointCloud(pts)
    mask = segment_navigable(estimate_normals(cloud))
    return cloud, mask, find_deployment_zone(cloud, mask, entry, **kw)


def test_flat_plane_zone_next_to_entry():
    cell = 0.1
    _, _, res = _search(grid(0, 4, -2, 2, cell), (2.0, 0.0, 0.0))
    assert res.reason == "ok"
    assert np.linalg.norm(res.zone.center - [2.0, 0.0, 0.0]) <= cell
    assert res.zone.distance_to_entry >= 0
    assert abs(res.zone.plane.signed_distance(res.zone.center)) <= res.zone.plane.rms_residual + 1e-9


def test_wall_has_no_zone():
    ys, zs = np.meshgrid(np.arange(0, 2, 0.1), np.arange(0, 1, 0.1))
    pts = np.column_stack([np.zeros(ys.size), ys.ravel(), zs.ravel()])
    _, _, res = _search(pts, (0.0, 1.0, 0.0))
    assert res.zone is None and res.reason == "no_candidate"


def test_empty_cloud_reason():
    res = find_deployment_zone(PointCloud(np.zeros((0, 3))), NavigabilityMask(np.zeros(0, bool), 0.5), (0, 0, 0))
    assert res.zone is None and res.reason == "empty_cloud"


def test_nearer_of_two_patches_wins():
    near = grid(0.6, 1.4, -0.4, 0.4, 0.1)
    far = grid(2.6, 3.4, -0.4, 0.4, 0.1)
    pts = np.vstack([near, far])
    cloud, mask, res = _search(pts, (0.0, 0.0, 0.0))
    assert res.zone.center[0] < 1.5
    idx, score = exhaustive_zone(pts, mask.mask, (0, 0, 0), 0.25, 1.0, 10.0)
    assert res.zone.index == idx
    assert res.zone.score == pytest.approx(score, abs=1e-9)
