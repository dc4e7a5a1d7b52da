from __future__ import annotations

import pytest

from mellin_gof.mellin import TestProblem

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def problem():
    """LogNormal(0, 1) null, Pareto(2) error, c = 1/2, unit weight."""
    return TestProblem.from_specs("lognormal:0:1", "pareto:2", 0.5, "unit")


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
