import numpy as np
import pytest

from tlfea import meshgen


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def beam():
    """The 36-element RES0 cantilever mesh."""
    return meshgen.cantilever_mesh(0)


def pytest_terminal_summary(terminalreporter):
    """Print the per-criterion acceptance verdicts collected during the run."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
