import numpy as np
import pytest

from hsflow.fields import Grid


@pytest.fixture(scope="session")
def grid2d() -> Grid:
    """Small 2-D grid with L = 8 so dyadic tangential radii sit on the lattice."""
    return Grid(n=2, L=8.0, N_xp=32, H=8.0, N_xn=24, T=1.0, N_t=32)


@pytest.fixture(scope="session")
def grid2d_fine() -> Grid:
    return Grid(n=2, L=8.0, N_xp=64, H=8.0, N_xn=48, T=1.0, N_t=64)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
