from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import core_partition, dbscan_flood_fill

from tethersim.perception.clustering import AreaOfInterest, Cluster, dbscan, select_target_cluster


def blob(center, n, spread, seed):
    return np.asarray(center) + np.random.default_rng(seed).uniform(-spread, spread, size=(n, 3))


def test_two_separated_blobs():
    eps = 0.05
    pts = np.vstack([blob([0, 0, 0], 40, 0.01, 0), blob([10 * eps, 0, 0], 40, 0.01, 1)])
    res = dbscan(pts, eps, 5)
    assert len(res.clusters) == 2 and len(res.noise) == 0


def test_one_dimensional_example():
    pts = np.array([[0, 0, 0], [0.5, 0, 0], [1.0, 0, 0], [10, 0, 0]], dtype=float)
    res = dbscan(pts, 0.6, 2)
    assert [c.member_indices.tolist() for c in res.clusters] == [[0, 1, 2]]
    assert res.noise.tolist() == [3]
    labels, _ = dbscan_flood_fill(pts, 0.6, 2)
    assert labels.tolist() == res.labels.tolist()


def test_empty_input():
    res = dbscan(np.zeros((0, 3)), 0.1, 3)
    assert res.clusters == [] and len(res.noise) == 0


def test_bad_parameters():
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 3)), 0.0, 3)
    with pytest.raises(ValueError):
        dbscan(np.zeros((3, 3)), 0.1, 0)


def random_instance(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 201))
    centers = rng.uniform(0, 1, size=(int(rng.integers(1, 6)), 3))
    pts = centers[rng.integers(len(centers), size=n)] + rng.normal(0, rng.uniform(0.01, 0.1), size=(n, 3))
    return pts, float(rng.uniform(0.02, 0.2)), int(rng.integers(1, 8))


@given(st.integers(0, 100_000))
def test_matches_flood_fill_oracle(seed):
    pts, eps, k = random_instance(seed)
    res = dbscan(pts, eps, k)
    labels, core = dbscan_flood_fill(pts, eps, k)
    assert res.core.tolist() == core.tolist()
    assert res.labels.tolist() == labels.tolist()


@given(st.integers(0, 100_000))
def test_every_point_once_and_centroids(seed):
    pts, eps, k = random_instance(seed)
    res = dbscan(pts, eps, k)
    members = np.concatenate([c.member_indices for c in res.clusters] + [res.noise])
    assert sorted(members.tolist()) == list(range(len(pts)))
    for c in res.clusters:
        assert len(c) > 0
        assert np.allclose(c.centroid, pts[c.member_indices].mean(axis=0))


@given(st.integers(0, 100_000))
def test_core_partition_permutation_invariant(seed):
    pts, eps, k = random_instance(seed)
    perm = np.random.default_rng(seed + 1).permutation(len(pts))
    a = dbscan(pts, eps, k)
    b = dbscan(pts[perm], eps, k)
    mapped = {frozenset(int(perm[i]) for i in g) for g in core_partition(b.labels, b.core)}
    assert core_partition(a.labels, a.core) == mapped


def cluster_at(p) -> Cluster:
    p = np.asarray(p, dtype=float)
    return Cluster(np.array([0]), p, np.array([True]))


AOI = AreaOfInterest((0.0, 0.0, 3.0), (0.0, 0.0, -1.0), 0.5)


def test_single_cluster_selected():
    c = cluster_at([0.1, 0.0, 1.0])
    assert select_target_cluster([c], AOI) is c


def test_centred_cluster_beats_closer_offset_one():
    a = cluster_at([0.05, 0.0, 1.0])  # perp 0.05, range 2.0 -> 0.25
    b = cluster_at([0.4, 0.0, 1.5])  # perp 0.4, range 1.5 -> 0.55
    assert select_target_cluster([b, a], AOI, 1.0, 0.1) is a


def test_nothing_inside_aoi():
    assert select_target_cluster([cluster_at([2.0, 0.0, 1.0]), cluster_at([0, 0, 4.0])], AOI) is None


@given(st.lists(st.tuples(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-1, 2.9)), min_size=1, max_size=8),
       st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0.01, 100))
def test_selection_invariant_to_weight_scaling(centroids, wc, wr, scale):
    clusters = [cluster_at(c) for c in centroids]
    assert select_target_cluster(clusters, AOI, wc, wr) is select_target_cluster(clusters, AOI, wc * scale, wr * scale)
