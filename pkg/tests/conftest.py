from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from drillbench.spaces import axis_in, generate_ball, make_generator  # noqa: E402


@pytest.fixture(scope="session")
def gen73():
    return make_generator("tiling:7,3")


@pytest.fixture(scope="session")
def ball73_12(gen73):
    return generate_ball(gen73, None, 12)


@pytest.fixture(scope="session")
def axis73_12(gen73, ball73_12):
    return axis_in(gen73, "LR", 4, measure=False).vertex_ids(ball73_12)


@pytest.fixture(scope="session")
def dist73_12(ball73_12):
    return ball73_12.graph.distance_matrix()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
