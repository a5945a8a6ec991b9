from pathlib import Path

import numpy as np
import pytest

from ems.synth import DomainSpec, Landmark, LandmarkMap

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def square(x0, y0, side):
    return [(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]


@pytest.fixture
def small_domain():
    # 50 x 50 cells of 8 m, padded to 64
    return DomainSpec(0, 0, 400, 400, 8)


@pytest.fixture
def campus():
    """Two buildings and an oriented building on a 400 m square."""
    return LandmarkMap([
        Landmark("A", "Building A", square(175, 175, 50)),
        Landmark("B", "Building B", square(40, 40, 40)),
        Landmark("C", "Building C", square(300, 60, 40), orientation=(0, 1)),
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
