from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tethersim.perception.clustering import Cluster
from tethersim.perception.mapping import AccumulatedMap, accumulate_map, pause, resume, voxel_downsample
from tethersim.perception.tracking import TrackEstimate, fuse_head_estimate
from tethersim.sensors import PointCloud, length_from_encoder, read_encoder, tick_length
from tethersim.world import WinchState


def cluster_at(p) -> Cluster:
    return Cluster(np.array([0]), np.asarray(p, dtype=float), np.array([True]))


def test_pure_vision():
    est = fuse_head_estimate(cluster_at([1, 2, 0.5]), 1.0, [0, 0, 5], None, 0.0, alpha=1.0)
    assert np.allclose(est.position, [1, 2, 0.5])
    assert (est.vertical_source, est.horizontal_source) == ("vision", "vision")


def test_occluded_fallback():
    prev = TrackEstimate(np.array([0.2, 0.1, 9.0]), "vision", "vision", 0.0)
    est = fuse_head_estimate(None, 3.0, [0, 0, 5], prev, 1.0)
    assert np.allclose(est.position, [0.2, 0.1, 2.0])
    assert (est.vertical_source, est.horizontal_source) == ("encoder", "hold_last")
    assert est.occluded


def test_midpoint_blend():
    est = fuse_head_estimate(cluster_at([0, 0, 0.4]), 4.4, [0, 0, 5.0], None, 0.0, alpha=0.5)
    assert est.position[2] == pytest.approx(0.5)


def test_negative_encoder_length_rejected():
    with pytest.raises(ValueError):
        fuse_head_estimate(None, -0.1, [0, 0, 1], None, 0.0)


@given(st.floats(0.0, 9.9), st.floats(-3, 3), st.floats(-3, 3), st.floats(1, 10))
def test_occluded_vertical_error_within_a_tick(length, x, y, z):
    # the head hangs at anchor z minus the true length; the estimate only sees encoder ticks
    winch = WinchState(deployed_length=length, max_length=10.0)
    est = fuse_head_estimate(None, length_from_encoder(read_encoder(winch)), [x, y, z], None, 0.0)
    assert abs(est.position[2] - (z - length)) <= tick_length(winch) + 1e-12


def cloud(pts):
    return PointCloud(np.asarray(pts, dtype=float))


def test_paused_map_ignores_clouds():
    m = pause(accumulate_map(AccumulatedMap(0.1), cloud([[0, 0, 0]])))
    assert accumulate_map(m, cloud([[5, 5, 5], [1, 1, 1]])) is m
    assert accumulate_map(resume(m), cloud([[5, 5, 5]])).voxel_count == 2


def test_single_point_single_voxel():
    assert accumulate_map(AccumulatedMap(0.1), cloud([[0.3, 0.2, 0.1]])).voxel_count == 1


def test_same_voxel_keeps_first_point():
    m = accumulate_map(AccumulatedMap(0.1), cloud([[0.01, 0.01, 0.01], [0.05, 0.05, 0.05]]))
    assert m.voxel_count == 1
    assert np.allclose(m.points[0], [0.01, 0.01, 0.01])


def test_camera_frame_rejected():
    with pytest.raises(ValueError):
        accumulate_map(AccumulatedMap(0.1), PointCloud(np.zeros((1, 3)), "camera"))


@given(st.lists(st.lists(st.tuples(*[st.floats(-2, 2)] * 3), max_size=30), min_size=1, max_size=6),
       st.lists(st.booleans(), min_size=6, max_size=6))
def test_voxel_count_monotone_and_frozen_when_paused(batches, paused):
    m = AccumulatedMap(0.2)
    for pts, p in zip(batches, paused):
        m = pause(m) if p else resume(m)
        before = m.voxel_count
        m = accumulate_map(m, cloud(np.array(pts).reshape(-1, 3)))
        assert m.voxel_count >= before
        if p:
            assert m.voxel_count == before
        keys = np.floor(m.points / m.voxel_size).astype(np.int64)
        assert len(np.unique(keys, axis=0)) == m.voxel_count


def test_voxel_downsample_one_per_voxel():
    pts = np.random.default_rng(0).uniform(0, 1, size=(500, 3))
    out = voxel_downsample(pts, 0.25)
    assert len(out) == len(np.unique(np.floor(pts / 0.25), axis=0))
