from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, title, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {title}: {detail}")


@pytest.fixture(scope="session")
def fuzz_reports():
    """The 50-scenario fuzz batch, run once per session."""
    from tethersim.runner import run_scenario
    from tethersim.scenarios import fuzz_batch

    return [(cfg, run_scenario(cfg)) for cfg in fuzz_batch(50)]


@pytest.fixture(scope="session")
def nominal_run(tmp_path_factory):
    """The nominal detached mission with its files written to a temp directory."""
    from tethersim.runner import run_scenario
    from tethersim.scenarios import nominal_scenario

    return run_scenario(nominal_scenario(), tmp_path_factory.mktemp("nominal"))
