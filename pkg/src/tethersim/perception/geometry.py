"""Surface normals, navigability, plane fitting and deployment-zone search."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from ..sensors import PointCloud

log = logging.getLogger(__name__)

UP = np.array([0.0, 0.0, 1.0])


class DegenerateInputError(ValueError):
    """Too few points, or points that do not span a plane."""


@dataclass(frozen=True, eq=False)
class NormalCloud:
    normals: np.ndarray  # (n, 3), NaN rows where invalid
    valid: np.ndarray  # (n,) bool
    source: PointCloud

    def __len__(self) -> int:
        return len(self.normals)


@dataclass(frozen=True, eq=False)
class Plane:
    normal: np.ndarray
    offset: float
    rms_residual: float = 0.0
    inlier_count: int = 0

    def signed_distance(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) @ self.normal - self.offset

    @property
    def tilt(self) -> float:
        return math.acos(min(1.0, abs(float(self.normal[2]))))


@dataclass(frozen=True, eq=False)
class NavigabilityMask:
    mask: np.ndarray
    slope_threshold: float

    def __len__(self) -> int:
        return len(self.mask)


@dataclass(frozen=True, eq=False)
class DeploymentZone:
    center: np.ndarray
    plane: Plane
    distance_to_entry: float
    score: float
    index: int = -1  # source point index of the winning candidate


@dataclass(frozen=True, eq=False)
class ZoneSearch:
    zone: DeploymentZone | None
    reason: str  # "ok", "empty_cloud", "no_candidate"
    candidates: np.ndarray  # bool per point
    scores: np.ndarray  # +inf for non-candidates

    def __bool__(self) -> bool:
        return self.zone is not None


def orient_up(normals: np.ndarray) -> np.ndarray:
    """Flip normals so z >= 0; exactly horizontal ones point toward +x, then +y."""
    n = np.array(normals, dtype=float, copy=True)
    key = np.where(n[..., 2] != 0, n[..., 2], np.where(n[..., 0] != 0, n[..., 0], n[..., 1]))
    n[key < 0] *= -1
    return n


def estimate_normals(cloud: PointCloud, k: int = 12, radius: float = 0.25) -> NormalCloud:
    """Smallest-eigenvector normal of each point's k-nearest-neighbour covariance.

    A point whose k nearest neighbours (itself included) do not all fall within
    ``radius`` gets an invalid normal.
    """
    if k < 3:
        raise ValueError(f"k must be >= 3, got {k}")
    pts = cloud.points
    n = len(pts)
    normals = np.full((n, 3), np.nan)
    if n < k:
        log.warning("cloud has %d points, fewer than k=%d; all normals invalid", n, k)
        return NormalCloud(normals, np.zeros(n, dtype=bool), cloud)
    dist, idx = cKDTree(pts).query(pts, k=k, distance_upper_bound=radius)
    valid = np.all(np.isfinite(dist), axis=1)
    if valid.any():
        nb = pts[idx[valid]]
        centered = nb - nb.mean(axis=1, keepdims=True)
        cov = np.einsum("nki,nkj->nij", centered, centered) / k
        _, vecs = np.linalg.eigh(cov)
        normals[valid] = orient_up(vecs[:, :, 0])
    return NormalCloud(normals, valid, cloud)


def segment_navigable(normals: NormalCloud, slope_threshold: float = math.radians(30)) -> NavigabilityMask:
    """Navigable iff the surface tilt from world-up is at most ``slope_threshold``."""
    if not 0 < slope_threshold < math.pi / 2:
        raise ValueError(f"slope_threshold must lie in (0, pi/2), got {slope_threshold}")
    nz = np.where(normals.valid, normals.normals[:, 2], -1.0)
    tilt = np.arccos(np.clip(nz, -1.0, 1.0))
    return NavigabilityMask(normals.valid & (tilt <= slope_threshold), slope_threshold)


def _as_points(points) -> np.ndarray:
    if isinstance(points, PointCloud):
        return points.points
    return np.asarray(points, dtype=float).reshape(-1, 3)


def _lsq_plane(pts: np.ndarray) -> Plane:
    if len(pts) < 3:
        raise DegenerateInputError(f"need at least 3 points for a plane, got {len(pts)}")
    c = pts.mean(axis=0)
    X = pts - c
    w, v = np.linalg.eigh(X.T @ X / len(pts))
    scale = max(w[2], 1e-300)
    if w[1] <= 1e-12 * scale or w[2] <= 0:
        raise DegenerateInputError("points are collinear or coincident")
    normal = orient_up(v[:, 0])
    normal = normal / np.linalg.norm(normal)
    offset = float(normal @ c)
    res = X @ normal
    return Plane(normal, offset, float(np.sqrt(np.mean(res * res))), len(pts))


def fit_plane(points, method: str = "least_squares", iterations: int = 200, inlier_tol: float = 0.02,
              seed: int = 0) -> Plane:
    """Fit ``normal . p = offset`` with an upward normal.

    ``least_squares`` is total least squares through the centroid; ``ransac``
    keeps the three-point hypothesis with the largest consensus and refits it
    on its inliers.
    """
    pts = _as_points(points)
    if method == "least_squares":
        return _lsq_plane(pts)
    if method != "ransac":
        raise ValueError(f"unknown plane-fit method {method!r}")
    if len(pts) < 3:
        raise DegenerateInputError(f"need at least 3 points for a plane, got {len(pts)}")
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = -1
    for _ in range(iterations):
        a, b, c = pts[rng.choice(len(pts), 3, replace=False)]
        nrm = np.cross(b - a, c - a)
        s = np.linalg.norm(nrm)
        if s < 1e-12:
            continue
        nrm /= s
        mask = np.abs((pts - a) @ nrm) <= inlier_tol
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask
    if best_mask is None:
        raise DegenerateInputError("no non-degenerate sample found; points are collinear")
    plane = _lsq_plane(pts[best_mask])
    inliers = int(np.sum(np.abs(plane.signed_distance(pts)) <= inlier_tol))
    return Plane(plane.normal, plane.offset, plane.rms_residual, inliers)


def _ball_adjacency(pts: np.ndarray, radius: float) -> sparse.csr_matrix:
    n = len(pts)
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    rows = np.concatenate([pairs[:, 0], pairs[:, 1], np.arange(n)])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0], np.arange(n)])
    return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def local_patch_stats(pts: np.ndarray, navigable: np.ndarray, radius: float):
    """Per point: neighbour count, navigable fraction and TLS rms within ``radius``."""
    A = _ball_adjacency(pts, radius)
    X = pts - pts.mean(axis=0)
    count = np.asarray(A.sum(axis=1)).ravel()
    frac = (A @ navigable.astype(float)) / count
    mean = (A @ X) / count[:, None]
    outer = np.einsum("ni,nj->nij", X, X).reshape(-1, 9)
    second = (A @ outer).reshape(-1, 3, 3) / count[:, None, None]
    cov = second - np.einsum("ni,nj->nij", mean, mean)
    lam = np.linalg.eigvalsh(cov)[:, 0]
    return count, frac, np.sqrt(np.clip(lam, 0.0, None))


def find_deployment_zone(cloud: PointCloud, mask: NavigabilityMask, entry_point, min_patch_radius: float = 0.25,
                         w_dist: float = 1.0, w_flatness: float = 10.0,
                         min_navigable_fraction: float = 0.9) -> ZoneSearch:
    """Pick the navigable patch that best trades distance-to-entry against flatness."""
    pts = cloud.points
    n = len(pts)
    if len(mask) != n:
        raise ValueError(f"mask length {len(mask)} does not match cloud length {n}")
    if n == 0:
        return ZoneSearch(None, "empty_cloud", np.zeros(0, dtype=bool), np.zeros(0))
    entry = np.asarray(entry_point, dtype=float)
    count, frac, rms = local_patch_stats(pts, mask.mask, min_patch_radius)
    cand = mask.mask & (frac >= min_navigable_fraction) & (count >= 3)
    dist = np.linalg.norm(pts - entry, axis=1)
    scores = np.where(cand, w_dist * dist + w_flatness * rms, np.inf)
    if not cand.any():
        return ZoneSearch(None, "no_candidate", cand, scores)
    best = int(np.argmin(scores))
    nb = cKDTree(pts).query_ball_point(pts[best], min_patch_radius)
    plane = _lsq_plane(pts[np.sort(nb)])
    p = pts[best]
    center = p - plane.signed_distance(p) * plane.normal
    zone = DeploymentZone(center, plane, float(np.linalg.norm(center - entry)), float(scores[best]), best)
    return ZoneSearch(zone, "ok", cand, scores)
