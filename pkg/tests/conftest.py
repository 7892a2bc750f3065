import math

import pytest

from leeway.geo import LocalPoint
from leeway.mission import Mission, Waypoint

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def straight_mission(length=100.0, speed=2.0, heading=0.0, radius=3.0):
    end = LocalPoint(length * math.cos(heading), length * math.sin(heading))
    return Mission(LocalPoint(0.0, 0.0), (Waypoint(end, speed),), radius)
