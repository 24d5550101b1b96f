import numpy as np
import pytest

from prismgrowth.energy import Anisotropy, wulff_shape
from prismgrowth.errors import DegenerateGeometry
from prismgrowth.geometry import BasePolygon, CrystalState

ACCEPTANCE_LINES = []


def random_states(n, seed=0, k=6, amplitude=0.25):
    """``n`` admissible, non-degenerate prisms around the unit regular k-gon."""
    rng = np.random.default_rng(seed)
    base = BasePolygon.regular(k, 1.0, 1.0)
    out = []
    while len(out) < n:
        try:
            out.append(CrystalState.at(base, rng.uniform(-amplitude, amplitude, k + 2)))
        except DegenerateGeometry:
            continue
    return out


@pytest.fixture
def hexagon():
    return CrystalState.at(BasePolygon.regular(6, 1.0, 1.0))


@pytest.fixture
def aniso():
    return Anisotropy(6, 1.0, 1.0)


@pytest.fixture
def wulff_state(aniso):
    return wulff_shape(aniso).state()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
