"""Shared runs.  The full-resolution solutions are computed once per session."""
import numpy as np
import pytest

from conhj.diagnostics import run_viscous_ladder
from conhj.limit import make_limit_config, run_limit
from conhj.model import resolve_model
from conhj.numerics import Grid1D

EPS_LADDER = (0.25, 0.1, 0.05, 0.025)


@pytest.fixture(scope="session")
def model():
    return resolve_model("satexp", {})


@pytest.fixture(scope="session")
def quadratic_well():
    """u0 = -x^2 / (1 + x^2)."""
    return resolve_model("satexp", {"u0_power": 2.0, "u0_depth": 1.0, "u0_width": 1.0})


@pytest.fixture(scope="session")
def grid():
    return Grid1D(-5.0, 15.0, 2001)


@pytest.fixture(scope="session")
def fine_grid(grid):
    return grid.refined(2)


@pytest.fixture(scope="session")
def fd_run(model, grid):
    return run_limit(make_limit_config(model, grid, 2.0, "fd_monotone"))


@pytest.fixture(scope="session")
def lax_run(model, grid):
    return run_limit(make_limit_config(model, grid, 2.0, "lax_oleinik"))


@pytest.fixture(scope="session")
def fd_fine(model, fine_grid):
    return run_limit(make_limit_config(model, fine_grid, 2.0, "fd_monotone"))


@pytest.fixture(scope="session")
def lax_fine(model, fine_grid):
    return run_limit(make_limit_config(model, fine_grid, 2.0, "lax_oleinik"))


@pytest.fixture(scope="session")
def viscous_ladder(model, grid):
    return run_viscous_ladder(model, grid, EPS_LADDER, 2.0, jobs=4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
