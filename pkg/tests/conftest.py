import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from flatcount.enumeration import enumerate_connections  # noqa: E402
from flatcount.surface import catalog  # noqa: E402


@pytest.fixture(scope="session")
def torus():
    return catalog("torus")


@pytest.fixture(scope="session")
def lorigami():
    return catalog("L-origami")


@pytest.fixture(scope="session")
def octagon():
    return catalog("regular-octagon")


@pytest.fixture(scope="session")
def torus_set():
    """Torus holonomies up to radius 30, enough for circle averages at t = 3."""
    return enumerate_connections(catalog("torus"), 30.0)


@pytest.fixture(scope="session")
def torus_sqrt2():
    return enumerate_connections(catalog("torus"), math.sqrt(2))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
