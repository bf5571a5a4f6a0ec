import numpy as np
import pytest

from eqldiv.network import Architecture, build


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_arch():
    """A small but fully featured architecture for fast tests."""
    return Architecture(n_in=2, n_out=2, depth=3, u=6, v=2)


@pytest.fixture
def small_net(small_arch):
    return build(small_arch, seed=7)
