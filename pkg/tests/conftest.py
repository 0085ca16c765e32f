import numpy as np
import pytest

from rollwaves import (
    DriveParams,
    PhysicalParams,
    TorusGrid,
    kernel_basis,
    period_lengths,
)
from rollwaves.linear import State
from rollwaves.spectral import EVEN, ODD, VectorField, random_field


@pytest.fixture(scope="session")
def phys():
    return PhysicalParams(0.15, 2.0)


@pytest.fixture(scope="session")
def drive_interior():
    return DriveParams(5.0, 10.0)


@pytest.fixture(scope="session")
def drive_border():
    return DriveParams(2.0, 3.8)


@pytest.fixture(scope="session")
def grid32(phys, drive_interior):
    L1, L2 = period_lengths(phys, drive_interior)
    return TorusGrid(L1, L2, 32, 32)


@pytest.fixture(scope="session")
def basis32(phys, drive_interior, grid32):
    return kernel_basis(phys, drive_interior, grid32)


@pytest.fixture(scope="session")
def basis64(phys, drive_interior):
    L1, L2 = period_lengths(phys, drive_interior)
    return kernel_basis(phys, drive_interior, TorusGrid(L1, L2, 64, 64))


@pytest.fixture(scope="session")
def border_basis64(phys, drive_border):
    L1, L2 = period_lengths(phys, drive_border)
    return kernel_basis(phys, drive_border, TorusGrid(L1, L2, 64, 64))


def make_random_state(grid, rng, tagged=True, normalize=True):
    if tagged:
        state = State(
            VectorField(
                random_field(grid, rng, parity=EVEN),
                random_field(grid, rng, parity=ODD),
            ),
            random_field(grid, rng, parity=EVEN, zero_mean=True),
        )
    else:
        state = State(
            VectorField(random_field(grid, rng), random_field(grid, rng)),
            random_field(grid, rng, zero_mean=True),
        )
    if normalize:
        state = state * (1.0 / state.norm())
    return state


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
