"""Simulation and autonomy stack for a UAV that lowers a small tracked UGV on a
tether, lets it drive into a hidden space, and winches it back up."""

from .config import ConfigError, ScenarioConfig, load_config, validate_config
from .mission import MissionConfig, Phase, mission_step
from .runner import RunReport, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "MissionConfig",
    "Phase",
    "RunReport",
    "ScenarioConfig",
    "load_config",
    "mission_step",
    "run_scenario",
    "validate_config",
]
