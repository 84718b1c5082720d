import numpy as np
import pytest
from hypothesis import strategies as st

from otfpca import GridMeasure, TransportMap

ACCEPTANCE_LINES = []


def random_transport(rng, M=101, roughness=1.0):
    """Strictly increasing map with random positive increments."""
    inc = rng.gamma(roughness, size=M - 1) + 1e-3
    t = np.concatenate([[0.0], np.cumsum(inc)])
    return TransportMap(t / t[-1])


def random_measure(rng, M=101, pinned=False):
    inc = rng.gamma(0.7, size=M - 1) + 1e-4
    q = np.concatenate([[0.0], np.cumsum(inc)])
    q = q / q[-1]
    if not pinned:
        lo, hi = np.sort(rng.uniform(0, 1, 2))
        q = lo + (hi - lo) * q
    return GridMeasure(q)


@st.composite
def transports(draw, M=41):
    seed = draw(st.integers(0, 2**32 - 1))
    rough = draw(st.sampled_from([0.3, 1.0, 3.0]))
    return random_transport(np.random.default_rng(seed), M, rough)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
