"""Mission state machine: a pure transition function over explicit observations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .perception.geometry import DegenerateInputError, DeploymentZone, Plane
from .perception.tracking import TrackEstimate


class Phase(str, Enum):
    IDLE = "Idle"
    SCAN_AND_MAP = "ScanAndMap"
    SELECT_ZONE = "SelectZone"
    POSITION_OVER_ZONE = "PositionOverZone"
    LOWER_TETHER = "LowerTether"
    VERIFY_TOUCHDOWN = "VerifyTouchdown"
    DETACH = "Detach"
    GROUND_OPS = "GroundOps"
    RETURN_AND_SIGNAL = "ReturnAndSignal"
    ALIGN_FOR_RETRIEVAL = "AlignForRetrieval"
    REATTACH = "Reattach"
    RETRACT = "Retract"
    DONE = "Done"
    ABORTED = "Aborted"

    def __str__(self) -> str:
        return self.value


P = Phase
TERMINAL = frozenset({P.DONE, P.ABORTED})

# Every phase may also fall to Aborted.
TRANSITIONS: dict[Phase, frozenset[Phase]] = {
    P.IDLE: frozenset({P.SCAN_AND_MAP}),
    P.SCAN_AND_MAP: frozenset({P.SELECT_ZONE}),
    P.SELECT_ZONE: frozenset({P.POSITION_OVER_ZONE}),
    P.POSITION_OVER_ZONE: frozenset({P.LOWER_TETHER}),
    P.LOWER_TETHER: frozenset({P.VERIFY_TOUCHDOWN}),
    P.VERIFY_TOUCHDOWN: frozenset({P.DETACH, P.GROUND_OPS, P.LOWER_TETHER}),
    P.DETACH: frozenset({P.GROUND_OPS, P.LOWER_TETHER}),
    P.GROUND_OPS: frozenset({P.RETURN_AND_SIGNAL}),
    P.RETURN_AND_SIGNAL: frozenset({P.ALIGN_FOR_RETRIEVAL}),
    P.ALIGN_FOR_RETRIEVAL: frozenset({P.REATTACH, P.RETRACT}),
    P.REATTACH: frozenset({P.RETRACT}),
    P.RETRACT: frozenset({P.DONE}),
    P.DONE: frozenset(),
    P.ABORTED: frozenset(),
}


def is_legal_transition(a: Phase | str, b: Phase | str) -> bool:
    a, b = Phase(a), Phase(b)
    if a in TERMINAL:
        return False
    return b == P.ABORTED or b in TRANSITIONS[a]


@dataclass(frozen=True)
class MissionPhase:
    name: Phase = P.IDLE
    entered_at: float = 0.0
    attempt_count: int = 0  # LowerTether entries so far


@dataclass(frozen=True)
class MissionConfig:
    mode: str = "detached"  # "attached" | "detached"
    d_min: float = 0.05
    touchdown_threshold: float = 0.05
    detach_verify_threshold: float = 0.05
    max_attempts: int = 3
    descent_rate: float = 0.3
    ground_ops_waypoints: list[tuple[float, float]] = field(default_factory=list)
    verify_window: int = 10
    stationary_speed: float = 0.01
    landing_criterion: str = "both"  # "ground_plane" | "separation" | "both"


def mission_config_violations(cfg: MissionConfig, prefix: str = "mission") -> list[str]:
    out = []
    if cfg.mode not in ("attached", "detached"):
        out.append(f"{prefix}.mode must be 'attached' or 'detached', got {cfg.mode!r}")
    if not cfg.d_min > 0:
        out.append(f"{prefix}.d_min must be > 0, got {cfg.d_min}")
    if not cfg.touchdown_threshold > 0:
        out.append(f"{prefix}.touchdown_threshold must be > 0, got {cfg.touchdown_threshold}")
    if not cfg.detach_verify_threshold > 0:
        out.append(f"{prefix}.detach_verify_threshold must be > 0, got {cfg.detach_verify_threshold}")
    if not cfg.max_attempts >= 1:
        out.append(f"{prefix}.max_attempts must be >= 1, got {cfg.max_attempts}")
    if not cfg.descent_rate > 0:
        out.append(f"{prefix}.descent_rate must be > 0, got {cfg.descent_rate}")
    if not cfg.verify_window >= 1:
        out.append(f"{prefix}.verify_window must be >= 1, got {cfg.verify_window}")
    if not cfg.stationary_speed > 0:
        out.append(f"{prefix}.stationary_speed must be > 0, got {cfg.stationary_speed}")
    if cfg.landing_criterion not in ("ground_plane", "separation", "both"):
        out.append(f"{prefix}.landing_criterion must be ground_plane, separation or both, "
                   f"got {cfg.landing_criterion!r}")
    return out


@dataclass(frozen=True)
class Evidence:
    clearance: float = math.nan
    separation_series: tuple[float, ...] = ()
    ugv_stationary: bool = False


@dataclass(frozen=True)
class DeploymentVerdict:
    outcome: str  # "success" | "failure" | "undecided"
    evidence: Evidence = field(default_factory=Evidence)


@dataclass(frozen=True)
class EventLogEntry:
    time: float
    phase: str
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Observations:
    start: bool = False
    scan_complete: bool = False
    zone_searched: bool = False
    zone: DeploymentZone | None = None
    at_zone: bool = False
    clearance: float | None = None
    ugv_attached: bool | None = None
    detach_request: bool = False
    touchdown: bool | None = None
    detach_verdict: DeploymentVerdict | None = None
    ground_ops_done: bool = False
    returned: bool = False
    aligned: bool = False
    reattach: str | None = None  # "captured" | "failed"
    stowed: bool = False


@dataclass(frozen=True)
class MissionCommands:
    pause_map: bool = False
    resume_map: bool = False
    epm: bool | None = None


@dataclass(frozen=True)
class MissionStep:
    phase: MissionPhase
    commands: MissionCommands = field(default_factory=MissionCommands)
    events: tuple[EventLogEntry, ...] = ()


def verify_touchdown(ugv_estimate: TrackEstimate, ground: Plane, threshold: float) -> bool:
    """True when the estimated UGV bottom sits within ``threshold`` of the ground plane."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    n = np.asarray(ground.normal, dtype=float)
    if not (np.all(np.isfinite(n)) and math.isfinite(ground.offset) and abs(float(n @ n) - 1.0) < 1e-6):
        raise DegenerateInputError("ground plane needs a finite unit normal")
    return float(ground.signed_distance(ugv_estimate.position)) <= threshold


def verify_detachment(separation_series, ugv_stationary: bool, min_sep: float, window: int = 10,
                      clearance: float = math.nan) -> DeploymentVerdict:
    """Separation must exceed ``min_sep`` and keep growing while the UGV sits still.

    The last ``window`` samples form the verification window; with fewer
    samples the verdict is undecided.
    """
    series = tuple(float(s) for s in separation_series)
    evidence = Evidence(clearance, series, bool(ugv_stationary))
    if len(series) < window or len(series) == 0:
        return DeploymentVerdict("undecided", evidence)
    w = np.asarray(series[-window:])
    ok = w[-1] > min_sep and bool(np.all(np.diff(w) > 0)) and ugv_stationary
    return DeploymentVerdict("success" if ok else "failure", evidence)


def _enter(phase: MissionPhase, to: Phase, now: float, events: list, **payload) -> MissionPhase:
    attempt = phase.attempt_count + (1 if to == P.LOWER_TETHER else 0)
    events.append(EventLogEntry(now, to.value, "phase",
                                {"from": phase.name.value, "to": to.value, "attempt": attempt, **payload}))
    return MissionPhase(to, now, attempt)


def _abort(phase: MissionPhase, now: float, events: list, reason: str, failure: bool) -> MissionStep:
    events.append(EventLogEntry(now, phase.name.value, "diagnostic", {"reason": reason, "failure": failure}))
    return MissionStep(_enter(phase, P.ABORTED, now, events, reason=reason), MissionCommands(), tuple(events))


def _illegal(phase: MissionPhase, obs: Observations) -> str | None:
    name = phase.name
    if obs.detach_verdict is not None and name != P.DETACH:
        return f"detachment verdict received in {name.value}"
    if obs.touchdown is not None and name != P.VERIFY_TOUCHDOWN:
        return f"touchdown verdict received in {name.value}"
    if obs.ugv_attached is False and name in (P.LOWER_TETHER, P.VERIFY_TOUCHDOWN, P.RETRACT):
        return f"UGV not attached during {name.value}"
    if obs.clearance is not None and math.isnan(obs.clearance):
        return "clearance is NaN"
    if obs.zone_searched and name != P.SELECT_ZONE:
        return f"zone search result received in {name.value}"
    return None


def _reattempt(phase: MissionPhase, config: MissionConfig, now: float, events: list, why: str) -> MissionStep:
    if phase.attempt_count >= config.max_attempts:
        return _abort(phase, now, events, f"{why}; {config.max_attempts} attempts exhausted", True)
    nxt = _enter(phase, P.LOWER_TETHER, now, events, reason=why)
    return MissionStep(nxt, MissionCommands(pause_map=True), tuple(events))


def mission_step(phase: MissionPhase, config: MissionConfig, obs: Observations, now: float) -> MissionStep:
    """Advance the mission by one decision; only edges in ``TRANSITIONS`` are taken."""
    events: list[EventLogEntry] = []
    name = phase.name
    if name in TERMINAL:
        return MissionStep(phase)
    bad = _illegal(phase, obs)
    if bad:
        return _abort(phase, now, events, bad, False)

    def go(to: Phase, cmds: MissionCommands = MissionCommands(), **payload) -> MissionStep:
        return MissionStep(_enter(phase, to, now, events, **payload), cmds, tuple(events))

    stay = MissionStep(phase)
    if name == P.IDLE:
        return go(P.SCAN_AND_MAP) if obs.start else stay
    if name == P.SCAN_AND_MAP:
        return go(P.SELECT_ZONE) if obs.scan_complete else stay
    if name == P.SELECT_ZONE:
        if not obs.zone_searched:
            return stay
        if obs.zone is None:
            return _abort(phase, now, events, "no deployment zone found", True)
        return go(P.POSITION_OVER_ZONE, zone=[float(v) for v in obs.zone.center])
    if name == P.POSITION_OVER_ZONE:
        return go(P.LOWER_TETHER, MissionCommands(pause_map=True)) if obs.at_zone else stay
    if name == P.LOWER_TETHER:
        c = obs.clearance
        if c is not None and c <= config.d_min:
            return go(P.VERIFY_TOUCHDOWN, clearance=c)
        if obs.detach_request:
            refused = {"reason": "detach refused above d_min", "clearance": c, "d_min": config.d_min}
            events.append(EventLogEntry(now, name.value, "violation", refused))
            return MissionStep(phase, MissionCommands(), tuple(events))
        return stay
    if name == P.VERIFY_TOUCHDOWN:
        if obs.touchdown is None:
            return stay
        if not obs.touchdown:
            return _reattempt(phase, config, now, events, "touchdown not confirmed")
        if config.mode == "attached":
            return go(P.GROUND_OPS, MissionCommands(resume_map=True))
        c = obs.clearance
        if c is None or not c <= config.d_min:
            refused = {"reason": "detach refused above d_min", "clearance": c, "d_min": config.d_min}
            events.append(EventLogEntry(now, name.value, "violation", refused))
            return MissionStep(phase, MissionCommands(), tuple(events))
        events.append(EventLogEntry(now, name.value, "detach", {"clearance": c, "d_min": config.d_min,
                                                                "attempt": phase.attempt_count}))
        return go(P.DETACH, MissionCommands(epm=False), clearance=c)
    if name == P.DETACH:
        v = obs.detach_verdict
        if v is None or v.outcome == "undecided":
            return stay
        events.append(EventLogEntry(now, name.value, "verdict", {
            "outcome": v.outcome, "clearance": v.evidence.clearance,
            "separation": list(v.evidence.separation_series), "ugv_stationary": v.evidence.ugv_stationary}))
        if v.outcome == "success":
            return go(P.GROUND_OPS, MissionCommands(resume_map=True))
        return _reattempt(phase, config, now, events, "detachment not confirmed")
    if name == P.GROUND_OPS:
        return go(P.RETURN_AND_SIGNAL) if obs.ground_ops_done else stay
    if name == P.RETURN_AND_SIGNAL:
        return go(P.ALIGN_FOR_RETRIEVAL) if obs.returned else stay
    if name == P.ALIGN_FOR_RETRIEVAL:
        if not obs.aligned:
            return stay
        if config.mode == "attached":
            return go(P.RETRACT)
        return go(P.REATTACH, MissionCommands(epm=True))
    if name == P.REATTACH:
        if obs.reattach == "captured":
            return go(P.RETRACT)
        if obs.reattach == "failed":
            return _abort(phase, now, events, "reattachment failed", True)
        return stay
    if name == P.RETRACT:
        return go(P.DONE) if obs.stowed and obs.ugv_attached is not False else stay
    raise AssertionError(f"unhandled phase {name}")  # pragma: no cover
