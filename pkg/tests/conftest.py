"""Shared fixtures: small geometries and seeded disorder."""

import numpy as np
import pytest

from eaglass import TorusGeometry, sample_couplings


@pytest.fixture(scope="session")
def torus4():
    return TorusGeometry(4)


@pytest.fixture(scope="session")
def torus6():
    return TorusGeometry(6)


@pytest.fixture(scope="session")
def torus8():
    return TorusGeometry(8)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def make_couplings(geom, values):
    """Hand-built coupling field for constructed test instances."""
    from eaglass import Couplings

    w = np.zeros(2 * geom.n_vertices)
    for e, val in values.items():
        w[e] = val
    return Couplings(geometry=geom, weights=w, seed=0)


@pytest.fixture(scope="session")
def w6(torus6):
    return sample_couplings(torus6, 11)


@pytest.fixture(scope="session")
def w8(torus8):
    return sample_couplings(torus8, 11)
