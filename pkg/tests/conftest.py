import numpy as np
import pytest

from nilmbound import data
from nilmbound.correlation import SamplingGrid
from nilmbound.signatures import RaisedCosinePulse, SignatureCatalog, SmoothTrapezoid


@pytest.fixture(scope="session")
def demo():
    return data.demo_scenario()


@pytest.fixture(scope="session")
def twins():
    return data.interchangeable_scenario()


@pytest.fixture
def demo_grid():
    return SamplingGrid.uniform(0.0, 0.5, 10.0)


def random_catalog(rng, n):
    """Catalog of ``n`` random smooth signatures short enough for a [0, 10] horizon."""
    sigs = []
    for _ in range(n):
        duration = rng.uniform(1.0, 3.0)
        if rng.random() < 0.5:
            sigs.append(RaisedCosinePulse(rng.uniform(0.2, 2.0), duration))
        else:
            rise = rng.uniform(0.1, 0.45) * duration
            fall = rng.uniform(0.1, 0.45) * duration
            sigs.append(SmoothTrapezoid(rng.uniform(0.2, 2.0), rise, fall, duration))
    return SignatureCatalog(tuple(f"load{i}" for i in range(n)), tuple(sigs))


def off_breakpoints(catalog, tau, grid, margin=1e-3):
    """True when no grid point sits within ``margin`` of a shifted breakpoint."""
    for sig, t in zip(catalog, tau):
        pts = sig.breakpoints() + t
        if np.min(np.abs(grid.times[:, None] - pts[None, :])) < margin:
            return False
    return True
