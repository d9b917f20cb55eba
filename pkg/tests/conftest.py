import pytest

from dronesched.instance import build_instance
from dronesched.schedule import Hover, Schedule, Transit

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def tiny1():
    # 2 nodes one step apart, single agent home at 0, demand at node 1, t=2
    return build_instance(5, [[0, 1], [1, 0]], [(0, 0)], [[0] * 5, [0, 0, 1, 0, 0]])


@pytest.fixture
def tiny1_round_trip():
    return Schedule.of([[Hover(0), Transit(0, 1, 1), Hover(1), Transit(1, 0, 1), Hover(0)]])


@pytest.fixture
def tiny2():
    travel = [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    demand = [[0] * 6, [0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0]]
    return build_instance(6, travel, [(0, 0)], demand)


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
