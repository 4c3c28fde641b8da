from .clustering import AreaOfInterest, Cluster, DbscanResult, dbscan, select_target_cluster
from .geometry import (
    DegenerateInputError,
    DeploymentZone,
    NavigabilityMask,
    NormalCloud,
    Plane,
    ZoneSearch,
    estimate_normals,
    find_deployment_zone,
    fit_plane,
    segment_navigable,
)
from .mapping import AccumulatedMap, accumulate_map, pause, resume, voxel_downsample
from .tracking import TrackEstimate, fuse_head_estimate

__all__ = [
    "AccumulatedMap",
    "AreaOfInterest",
    "Cluster",
    "DbscanResult",
    "DegenerateInputError",
    "DeploymentZone",
    "NavigabilityMask",
    "NormalCloud",
    "Plane",
    "TrackEstimate",
    "ZoneSearch",
    "accumulate_map",
    "dbscan",
    "estimate_normals",
    "find_deployment_zone",
    "fit_plane",
    "fuse_head_estimate",
    "pause",
    "resume",
    "segment_navigable",
    "select_target_cluster",
    "voxel_downsample",
]
