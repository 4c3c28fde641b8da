"""Built-in scenarios: the nominal mission, fault injection, fuzz batches, retrieval trials."""

from __future__ import annotations

import numpy as np

from .config import CameraSpec, EnclosureSpec, ScenarioConfig, TerrainSpec, UavSpec
from .mission import MissionConfig


def nominal_scenario(seed: int = 0, mode: str = "detached") -> ScenarioConfig:
    """Flat 10 m x 10 m field with a walled hidden space; the doorway is the entry."""
    cfg = ScenarioConfig(
        name=f"nominal_{mode}",
        seed=seed,
        entry=(6.0, 5.0),
        enclosure=EnclosureSpec(direction="+x", depth=2.0, width=2.0),
        terrain=TerrainSpec(kind="flat", size=(10.0, 10.0), cell_size=0.05),
        uav=UavSpec(start=(3.0, 4.0, 2.0)),
        mission=MissionConfig(mode=mode),
    )
    return cfg


def drag_fault_scenario(seed: int = 0) -> ScenarioConfig:
    """The first magnet release is ignored, so retraction drags the UGV back up."""
    cfg = nominal_scenario(seed)
    cfg.name = "drag_fault"
    cfg.physics.epm_release_failures = 1
    return cfg


def fuzz_scenario(index: int, base_seed: int = 0) -> ScenarioConfig:
    """Small-camera mission with randomized terrain, entry, start and faults."""
    seed = base_seed + index
    rng = np.random.default_rng([base_seed, index])
    kind = ("flat", "procedural", "ramp")[int(rng.integers(3))]
    terrain = TerrainSpec(kind=kind, size=(8.0, 8.0), cell_size=0.05, amplitude=0.08, n_bumps=4,
                          slope=(float(rng.uniform(-0.05, 0.05)), float(rng.uniform(-0.05, 0.05))))
    entry = (float(rng.uniform(3.5, 4.5)), float(rng.uniform(3.0, 5.0)))
    direction = ("+x", "+y", "-y")[int(rng.integers(3))]
    cfg = ScenarioConfig(
        name=f"fuzz_{index:03d}",
        seed=seed,
        duration_limit=240.0,
        entry=entry,
        enclosure=EnclosureSpec(direction=direction, depth=1.5, width=1.6, door_width=0.7),
        terrain=terrain,
        uav=UavSpec(start=(float(rng.uniform(1.0, 2.0)), float(rng.uniform(1.0, 2.0)), 2.0)),
        mission=MissionConfig(mode="detached" if rng.random() < 0.8 else "attached",
                              max_attempts=int(rng.integers(1, 4)),
                              descent_rate=float(rng.uniform(0.25, 0.4))),
        scan_altitude=3.5,
        deploy_altitude=float(rng.uniform(2.0, 3.0)),
    )
    cfg.perception.camera = CameraSpec(width=80, height=60)
    cfg.physics.epm_release_failures = int(rng.choice([0, 0, 0, 1, 2, 3]))
    cfg.physics.swing_noise = float(rng.choice([0.0, 0.01]))
    return cfg


def fuzz_batch(n: int = 50, base_seed: int = 0) -> list[ScenarioConfig]:
    return [fuzz_scenario(i, base_seed) for i in range(n)]


def retrieval_scenario(seed: int, swing_noise: float = 0.02) -> ScenarioConfig:
    """UGV waiting on flat ground; the UAV starts offset and must re-latch the head."""
    rng = np.random.default_rng(seed)
    ugv = (5.0 + float(rng.uniform(-0.2, 0.2)), 5.0 + float(rng.uniform(-0.2, 0.2)), float(rng.uniform(-np.pi, np.pi)))
    off = rng.uniform(-0.5, 0.5, size=2)
    cfg = ScenarioConfig(
        name=f"retrieval_{seed:03d}",
        seed=seed,
        start="retrieve",
        duration_limit=120.0,
        entry=(5.0, 5.0),
        ugv_start=ugv,
        terrain=TerrainSpec(kind="flat", size=(10.0, 10.0), cell_size=0.05),
        uav=UavSpec(start=(ugv[0] + float(off[0]), ugv[1] + float(off[1]), 2.5)),
        deploy_altitude=2.5,
    )
    cfg.physics.swing_noise = swing_noise
    return cfg


def unreachable_zone_scenario(seed: int = 0) -> ScenarioConfig:
    """A 45 degree slope everywhere: nothing is navigable, so zone selection must fail."""
    return ScenarioConfig(
        name="unreachable_zone",
        seed=seed,
        entry=(3.0, 3.0),
        terrain=TerrainSpec(kind="ramp", size=(6.0, 6.0), slope=(1.0, 0.0)),
        uav=UavSpec(start=(2.0, 2.0, 2.0)),
    )
