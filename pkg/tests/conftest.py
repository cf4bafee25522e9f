import numpy as np
import pytest

from cuneo import synthetic


@pytest.fixture(scope="session")
def small_catalog():
    """Six distinct wedge-glyph masters, reused across tests."""
    return synthetic.wedge_glyph_catalog(6, side=48, seed=101)


@pytest.fixture()
def rng():
    return np.random.default_rng(4242)
