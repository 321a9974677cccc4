import numpy as np
import pytest

from dodecawave import fem, mesh


@pytest.fixture(scope="session")
def mesh0():
    return mesh.build_mesh(0)


@pytest.fixture(scope="session")
def mesh1():
    return mesh.build_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return mesh.build_mesh(2)


@pytest.fixture(scope="session")
def system0(mesh0):
    return fem.assemble(mesh0)


@pytest.fixture(scope="session")
def system1(mesh1):
    return fem.assemble(mesh1)


@pytest.fixture(scope="session")
def system2(mesh2):
    return fem.assemble(mesh2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_unit_quaternions(rng, n):
    x = rng.standard_normal((n, 4))
    return x / np.linalg.norm(x, axis=1, keepdims=True)
