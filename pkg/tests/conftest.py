"""Shared fixtures for the SliceLRTD test suite."""

import numpy as np
import pytest

from algebra.tensor import Tensor3
from algebra.transforms import build_transform, mproduct
from config.settings import Settings


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def settings():
    return Settings(_env_file=None)


@pytest.fixture
def random_tensor(rng):
    def make(dims):
        return Tensor3(rng.standard_normal(dims))
    return make


@pytest.fixture
def low_rank_tensor(rng):
    """x = A ★_M B with A: (n1, r, n3), B: (r, n2, n3) standard normal."""
    def make(n1, n2, n3, r, kind="dct"):
        t = build_transform(kind, n3)
        a = Tensor3(rng.standard_normal((n1, r, n3)))
        b = Tensor3(rng.standard_normal((r, n2, n3)))
        return mproduct(t, a, b), t
    return make
