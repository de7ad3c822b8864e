from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coupled_engine import CoupledSystem, SimConfig, build_single_cylinder, run_ensemble  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def system():
    return CoupledSystem.default()


@pytest.fixture(scope="session")
def default_ensemble(system):
    """Default 20 ms single-cylinder cycle, 250 trajectories (shared across tests)."""
    return run_ensemble(system, build_single_cylinder(), SimConfig(), 250)


@pytest.fixture(scope="session")
def small_ensemble(system):
    return run_ensemble(system, build_single_cylinder(), SimConfig(seed=7), 40)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
