"""Voxel point accumulator that can be frozen while the payload is moving."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..sensors import PointCloud


@dataclass(frozen=True, eq=False)
class AccumulatedMap:
    voxel_size: float = 0.05
    keys: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    paused: bool = False

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")

    @property
    def voxel_count(self) -> int:
        return len(self.keys)

    def cloud(self) -> PointCloud:
        return PointCloud(self.points, "world")


def pause(m: AccumulatedMap) -> AccumulatedMap:
    return replace(m, paused=True)


def resume(m: AccumulatedMap) -> AccumulatedMap:
    return replace(m, paused=False)


def accumulate_map(m: AccumulatedMap, cloud: PointCloud) -> AccumulatedMap:
    """Insert world-frame points; the first point seen in a voxel stays its representative."""
    if m.paused or len(cloud) == 0:
        return m
    if cloud.frame != "world":
        raise ValueError("map accumulation needs a world-frame cloud")
    new_keys = np.floor(cloud.points / m.voxel_size).astype(np.int64)
    keys = np.concatenate([m.keys, new_keys])
    pts = np.concatenate([m.points, cloud.points])
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return replace(m, keys=keys[first], points=pts[first])


def voxel_downsample(points: np.ndarray, voxel_size: float) -> np.ndarray:
    """One representative per voxel (first occurrence), kept in input order."""
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    if len(points) == 0:
        return points
    keys = np.floor(points / voxel_size).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    first.sort()
    return points[first]
