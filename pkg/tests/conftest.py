from __future__ import annotations

import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}
SUITE_BUDGET_S = 300.0
EXPERIMENT_BUDGET_S = 600.0
_durations = {"suite": 0.0, "experiments": 0.0}


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), detail)
    return record


def pytest_runtest_logreport(report):
    bucket = "experiments" if "experiment" in report.keywords else "suite"
    _durations[bucket] += report.duration


def experiment_seconds() -> float:
    return _durations["experiments"]


def pytest_sessionstart(session):
    session.config._linpro_t0 = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    if not ACCEPTANCE:
        return
    suite, exp = _durations["suite"], _durations["experiments"]
    ok = suite < SUITE_BUDGET_S and exp < EXPERIMENT_BUDGET_S
    ACCEPTANCE[10] = (ok, f"suite without experiments {suite:.1f}s (< {SUITE_BUDGET_S:.0f}s), "
                          f"experiments {exp:.1f}s (< {EXPERIMENT_BUDGET_S:.0f}s)")
    if not ok and exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
