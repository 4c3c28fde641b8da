from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tethersim.mission import (
    TRANSITIONS,
    DeploymentVerdict,
    MissionConfig,
    MissionPhase,
    Observations,
    Phase,
    is_legal_transition,
    mission_config_violations,
    mission_step,
    verify_detachment,
    verify_touchdown,
)
from tethersim.perception.geometry import DegenerateInputError, Plane
from tethersim.perception.tracking import TrackEstimate

CFG = MissionConfig()
GROUND = Plane(np.array([0.0, 0.0, 1.0]), 0.0)


def at(z):
    return TrackEstimate(np.array([0.0, 0.0, z]), "vision", "vision", 0.0)


def test_touchdown_examples():
    assert verify_touchdown(at(0.02), GROUND, 0.05)
    assert not verify_touchdown(at(0.10), GROUND, 0.05)


def test_touchdown_rejects_degenerate_plane():
    with pytest.raises(DegenerateInputError):
        verify_touchdown(at(0.0), Plane(np.zeros(3), 0.0), 0.05)


def test_detachment_examples():
    assert verify_detachment([0.06, 0.09, 0.13], True, 0.05, window=3).outcome == "success"
    assert verify_detachment([0.06, 0.06, 0.06], False, 0.05, window=3).outcome == "failure"
    assert verify_detachment([0.03], True, 0.05, window=5).outcome == "undecided"
    assert verify_detachment([], True, 0.05).outcome == "undecided"


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=15), st.booleans(), st.floats(-1, 1), st.floats(-1, 1),
       st.integers(1, 15))
def test_detachment_monotone_in_min_sep(series, still, a, b, window):
    lo, hi = sorted((a, b))
    if verify_detachment(series, still, hi, window).outcome == "success":
        assert verify_detachment(series, still, lo, window).outcome == "success"


def step(name, obs, attempt=1, cfg=CFG):
    return mission_step(MissionPhase(name, 0.0, attempt), cfg, obs, 1.0)


def test_lower_to_verify_at_clearance():
    res = step(Phase.LOWER_TETHER, Observations(clearance=0.04))
    assert res.phase.name == Phase.VERIFY_TOUCHDOWN


def test_failed_touchdown_reattempts():
    res = step(Phase.VERIFY_TOUCHDOWN, Observations(touchdown=False, clearance=0.04), attempt=1)
    assert res.phase.name == Phase.LOWER_TETHER and res.phase.attempt_count == 2
    assert res.commands.pause_map


def test_detach_refused_above_d_min():
    res = step(Phase.LOWER_TETHER, Observations(clearance=0.2, detach_request=True))
    assert res.phase.name == Phase.LOWER_TETHER
    assert [e.kind for e in res.events] == ["violation"]


def test_detach_issued_with_clearance():
    res = step(Phase.VERIFY_TOUCHDOWN, Observations(touchdown=True, clearance=0.03))
    assert res.phase.name == Phase.DETACH and res.commands.epm is False
    (detach,) = [e for e in res.events if e.kind == "detach"]
    assert detach.payload["clearance"] <= CFG.d_min


def test_detach_guard_in_verify():
    res = step(Phase.VERIFY_TOUCHDOWN, Observations(touchdown=True, clearance=0.2))
    assert res.phase.name == Phase.VERIFY_TOUCHDOWN
    assert not any(e.kind == "detach" for e in res.events)


def test_attached_mode_skips_detach():
    res = step(Phase.VERIFY_TOUCHDOWN, Observations(touchdown=True, clearance=0.03), cfg=MissionConfig(mode="attached"))
    assert res.phase.name == Phase.GROUND_OPS and res.commands.resume_map


def test_failure_verdict_reattempts_then_aborts():
    bad = DeploymentVerdict("failure")
    res = step(Phase.DETACH, Observations(detach_verdict=bad), attempt=1)
    assert res.phase.name == Phase.LOWER_TETHER and res.phase.attempt_count == 2
    res = step(Phase.DETACH, Observations(detach_verdict=bad), attempt=3)
    assert res.phase.name == Phase.ABORTED


def test_no_zone_aborts_at_select():
    res = step(Phase.SELECT_ZONE, Observations(zone_searched=True, zone=None))
    assert res.phase.name == Phase.ABORTED
    assert res.events[0].kind == "diagnostic" and res.events[0].payload["failure"]


def test_illegal_observation_aborts():
    res = step(Phase.GROUND_OPS, Observations(touchdown=True))
    assert res.phase.name == Phase.ABORTED
    assert not res.events[0].payload["failure"]


def test_terminal_phases_are_absorbing():
    done = MissionPhase(Phase.DONE, 0.0, 1)
    assert mission_step(done, CFG, Observations(start=True), 5.0).phase is done


def test_transition_relation():
    assert is_legal_transition("Idle", "ScanAndMap")
    assert is_legal_transition("GroundOps", "Aborted")
    assert not is_legal_transition("Idle", "Detach")
    assert not is_legal_transition("Done", "Aborted")
    assert set(TRANSITIONS) == set(Phase)


observations = st.builds(
    Observations,
    start=st.booleans(), scan_complete=st.booleans(), at_zone=st.booleans(),
    clearance=st.one_of(st.none(), st.floats(0, 0.3)),
    touchdown=st.one_of(st.none(), st.booleans()),
    detach_verdict=st.one_of(st.none(), st.sampled_from([DeploymentVerdict(o) for o in
                                                         ("success", "failure", "undecided")])),
    ground_ops_done=st.booleans(), returned=st.booleans(), aligned=st.booleans(),
    reattach=st.sampled_from([None, "captured", "failed"]), stowed=st.booleans(),
)


@given(st.lists(observations, max_size=80), st.integers(1, 4))
def test_random_runs_stay_legal_and_bounded(obs_seq, max_attempts):
    cfg = MissionConfig(max_attempts=max_attempts)
    phase = MissionPhase()
    entries = 0
    for i, obs in enumerate(obs_seq):
        res = mission_step(phase, cfg, obs, float(i))
        if res.phase.name != phase.name or res.phase.attempt_count != phase.attempt_count:
            assert is_legal_transition(phase.name, res.phase.name)
        for e in res.events:
            if e.kind == "detach":
                assert e.payload["clearance"] <= cfg.d_min
            if e.kind == "phase" and e.payload["to"] == "LowerTether":
                entries += 1
        phase = res.phase
        assert phase.attempt_count == entries <= max_attempts


def test_config_violations_name_fields():
    msgs = mission_config_violations(MissionConfig(d_min=-0.1, max_attempts=0, mode="x"))
    assert any("d_min" in m for m in msgs)
    assert any("max_attempts" in m for m in msgs)
    assert any("mode" in m for m in msgs)
