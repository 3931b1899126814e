"""Shared fixtures plus a terminal summary line per acceptance criterion."""

from __future__ import annotations

import pytest

from canopy.pipeline import SimulationPipeline
from canopy.scenario import default_scenario

_acceptance_results: dict[str, str] = {}


@pytest.fixture(scope="session")
def ninety_day_run():
    """One full default-scenario run (4320 ticks) shared by the acceptance suite."""
    import time

    pipeline = SimulationPipeline(default_scenario())
    t0 = time.monotonic()
    pipeline.advance(4320)
    elapsed = time.monotonic() - t0
    return pipeline, elapsed


@pytest.fixture()
def small_run():
    """A short (2-day) run for API-level tests."""
    pipeline = SimulationPipeline(default_scenario())
    pipeline.advance(96)
    return pipeline


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::")[-1]
        _acceptance_results[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"{outcome}  {name}")
