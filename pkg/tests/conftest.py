import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from mapfsel.grid import Agent, Grid, Scenario  # noqa: E402


def make_scenario(rows, agents, map_name="m", scenario_id="s") -> Scenario:
    grid = Grid.from_rows(rows) if not isinstance(rows, Grid) else rows
    return Scenario(grid, tuple(Agent(tuple(s), tuple(g)) for s, g in agents), map_name, scenario_id)


@pytest.fixture
def corridor_swap() -> Scenario:
    return make_scenario(["..."], [((0, 0), (0, 2)), ((0, 2), (0, 0))])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance outcomes, filled in by test_acceptance and printed at the end of the run
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, verdict, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{n}] {verdict} {name}" + (f"  ({detail})" if detail else ""))
