import numpy as np
import pytest

from twolevel_consensus import demo_scenario, run
from twolevel_consensus.scenario import demo_graphs, demo_plants


@pytest.fixture(scope="session")
def demo_runs():
    """Full-horizon demo trajectories for both dynamic controllers (computed once)."""
    out = {}
    for kind in ("state", "output"):
        s = demo_scenario(kind)
        out[kind] = (s, *run(s))
    return out


@pytest.fixture
def plants():
    return demo_plants()


@pytest.fixture
def graphs():
    return demo_graphs()


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


ACCEPTANCE_RESULTS = {}


def record_criterion(number, title, ok, detail=""):
    ACCEPTANCE_RESULTS[number] = (title, bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}  {detail}")
