"""Tether-head position from a selected cluster fused with the winch encoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import Cluster


@dataclass(frozen=True, eq=False)
class TrackEstimate:
    position: np.ndarray
    vertical_source: str  # "vision" | "encoder"
    horizontal_source: str  # "vision" | "hold_last"
    timestamp: float

    @property
    def occluded(self) -> bool:
        return self.vertical_source == "encoder"


def fuse_head_estimate(selected: Cluster | None, encoder_len: float, anchor_world, prev: TrackEstimate | None,
                       now: float, alpha: float = 0.7, vision_z_offset: float = 0.0) -> TrackEstimate:
    """Blend the cluster centroid with the encoder-derived head height.

    With a cluster, xy comes from the centroid and z is
    ``alpha * (centroid z + vision_z_offset) + (1 - alpha) * (anchor z - encoder_len)``.
    Without one, z is the encoder value and xy is held from ``prev`` (or the
    anchor when there is no history).
    """
    if encoder_len < 0:
        raise ValueError(f"encoder length must be non-negative, got {encoder_len}")
    anchor = np.asarray(anchor_world, dtype=float)
    z_enc = anchor[2] - encoder_len
    if selected is not None:
        c = selected.centroid
        z = alpha * (c[2] + vision_z_offset) + (1.0 - alpha) * z_enc
        return TrackEstimate(np.array([c[0], c[1], z]), "vision", "vision", now)
    xy = prev.position[:2] if prev is not None else anchor[:2]
    return TrackEstimate(np.array([xy[0], xy[1], z_enc]), "encoder", "hold_last", now)
