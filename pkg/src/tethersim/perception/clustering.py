"""Density-based clustering and target-cluster selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from ..sensors import PointCloud


@dataclass(frozen=True, eq=False)
class Cluster:
    member_indices: np.ndarray
    centroid: np.ndarray
    is_core: np.ndarray

    def __len__(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True, eq=False)
class DbscanResult:
    clusters: list[Cluster]
    noise: np.ndarray
    labels: np.ndarray  # -1 for noise
    core: np.ndarray


@dataclass(frozen=True)
class AreaOfInterest:
    origin: tuple[float, float, float]
    direction: tuple[float, float, float] = (0.0, 0.0, -1.0)
    radius: float = 0.5


def dbscan(points, eps: float = 0.05, min_pts: int = 5) -> DbscanResult:
    """DBSCAN with deterministic border assignment.

    Core clusters are connected components of core points, numbered by their
    lowest member index. A border point joins the lowest-numbered cluster
    among its core neighbours.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    pts = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        e = np.zeros(0, dtype=np.intp)
        return DbscanResult([], e, e.copy(), np.zeros(0, dtype=bool))
    pairs = cKDTree(pts).query_pairs(eps, output_type="ndarray")
    i, j = np.concatenate([pairs[:, 0], pairs[:, 1]]), np.concatenate([pairs[:, 1], pairs[:, 0]])
    core = np.bincount(i, minlength=n) + 1 >= min_pts
    both = core[i] & core[j]
    graph = coo_matrix((np.ones(int(both.sum())), (i[both], j[both])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    # number clusters by their lowest core member
    labels = np.full(n, -1, dtype=np.intp)
    core_idx = np.flatnonzero(core)
    comps, first = np.unique(comp[core_idx], return_index=True)
    next_label = len(comps)
    if next_label:
        lut = np.full(comp.max() + 1, -1, dtype=np.intp)
        lut[comps[np.argsort(first)]] = np.arange(next_label)
        labels[core_idx] = lut[comp[core_idx]]
    # border points: lowest label among core neighbours
    border = ~core[i] & core[j]
    if border.any():
        owner = np.full(n, np.iinfo(np.intp).max, dtype=np.intp)
        np.minimum.at(owner, i[border], labels[j[border]])
        has = owner < np.iinfo(np.intp).max
        labels[has] = owner[has]
    clusters = []
    for lab in range(next_label):
        members = np.flatnonzero(labels == lab)
        clusters.append(Cluster(members, pts[members].mean(axis=0), core[members]))
    return DbscanResult(clusters, np.flatnonzero(labels < 0), labels, core)


def select_target_cluster(clusters: list[Cluster], aoi: AreaOfInterest, w_center: float = 1.0,
                          w_range: float = 0.1) -> Cluster | None:
    """Most centred and closest cluster inside the area of interest.

    Score is ``w_center * perpendicular offset + w_range * distance along the
    ray``; clusters behind the origin or farther than ``aoi.radius`` from the
    ray are ignored. Returns None when nothing qualifies.
    """
    if w_center < 0 or w_range < 0 or (w_center == 0 and w_range == 0):
        raise ValueError("weights must be non-negative and not both zero")
    o = np.asarray(aoi.origin, dtype=float)
    d = np.asarray(aoi.direction, dtype=float)
    d = d / np.linalg.norm(d)
    best, best_score = None, np.inf
    for c in clusters:
        v = c.centroid - o
        along = float(v @ d)
        perp = float(np.linalg.norm(v - along * d))
        if along < 0 or perp > aoi.radius:
            continue
        score = w_center * perp + w_range * along
        if score < best_score:
            best, best_score = c, score
    return best
