import numpy as np
import pytest

from nsch import FaceField, GridSpec, PhysParams, ScalarField


@pytest.fixture
def grid6():
    # rectangular cells on purpose: hx != hy flushes out axis mix-ups
    return GridSpec(6, 6, 1.5, 1.2)


@pytest.fixture
def grid65():
    return GridSpec(6, 5, 1.5, 1.2)


@pytest.fixture
def params():
    return PhysParams()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_scalar(grid, rng, scale=1.0):
    return ScalarField(grid, scale * rng.standard_normal((grid.nx, grid.ny)))


def random_face(grid, rng, scale=1.0, noslip=True):
    f = FaceField(
        grid,
        scale * rng.standard_normal((grid.nx + 1, grid.ny)),
        scale * rng.standard_normal((grid.nx, grid.ny + 1)),
    )
    return f.zero_boundary_normal() if noslip else f


def random_solenoidal(grid, rng, scale=1.0):
    """Discretely divergence-free no-slip field from a random stream function."""
    from nsch.mac import stream_function_velocity

    psi = np.zeros((grid.nx + 1, grid.ny + 1))
    psi[1:-1, 1:-1] = scale * rng.standard_normal((grid.nx - 1, grid.ny - 1))
    return stream_function_velocity(grid, psi)
