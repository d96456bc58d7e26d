"""Fixtures compartidas."""

import numpy as np
import pytest

from tests.oracles import make_instance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_instance(rng):
    """N=4, M=8, L=3, λ=0.3."""
    return make_instance(rng, 4, 8, 3)
