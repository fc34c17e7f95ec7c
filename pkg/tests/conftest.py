import sys
from pathlib import Path

import numpy as np
import pytest

REPO = Path(__file__).resolve().parents[1]
FIXTURES = REPO / "fixtures"

sys.path.insert(0, str(REPO / "src"))

from dcstab import fileio  # noqa: E402


@pytest.fixture(scope="session")
def fixture_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def radial10():
    return fileio.load_network(FIXTURES / "radial10.toml", seed=0).net.resolved()


@pytest.fixture(scope="session")
def radial10_pi():
    return fileio.load_network(FIXTURES / "radial10.toml", seed=0,
                               controller="pi").net.resolved()


@pytest.fixture(scope="session")
def mesh8():
    return fileio.load_network(FIXTURES / "mesh8.toml", seed=0).net.resolved()


@pytest.fixture(scope="session")
def mesh8_pi():
    return fileio.load_network(FIXTURES / "mesh8.toml", seed=0,
                               controller="pi").net.resolved()


@pytest.fixture(scope="session")
def two_bus():
    return fileio.load_network(FIXTURES / "two_bus.toml", seed=0).net


def hausdorff(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 and b.size == 0:
        return 0.0
    d1 = max(np.min(np.abs(b - x)) for x in a)
    d2 = max(np.min(np.abs(a - x)) for x in b)
    return max(d1, d2)
