import numpy as np
import pytest

from maflow.grid import ScalarField, TorusGrid, volume_weights
from maflow.presets import MetricPreset, build_metric


@pytest.fixture(scope="session")
def grid1():
    return TorusGrid(1, 16)


@pytest.fixture(scope="session")
def grid2():
    return TorusGrid(2, 8)


@pytest.fixture(scope="session")
def flat1(grid1):
    return build_metric(grid1, MetricPreset("flat"))


@pytest.fixture(scope="session")
def flat2(grid2):
    return build_metric(grid2, MetricPreset("flat"))


@pytest.fixture(scope="session")
def nonkahler1(grid1):
    return build_metric(grid1, MetricPreset("hermitian_nonkahler", eps=0.3))


@pytest.fixture(scope="session")
def nonkahler2(grid2):
    return build_metric(grid2, MetricPreset("hermitian_nonkahler", eps=0.3))


@pytest.fixture(scope="session")
def weights1(flat1):
    return volume_weights(flat1)


def field_from(grid, fn):
    """Sample a coordinate function onto a ScalarField."""
    coords = grid.axis_coordinates()
    vals = np.broadcast_to(fn(coords), grid.shape).copy()
    return ScalarField(grid, np.asarray(vals, dtype=float))


def random_hermitian_pd(rng, n, lo=0.5, hi=2.0):
    evs = rng.uniform(lo, hi, size=n)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    a = (q * evs) @ q.conj().T
    return 0.5 * (a + a.conj().T)
