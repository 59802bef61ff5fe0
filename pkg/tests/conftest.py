import numpy as np
import pytest

from multiscale_sobolev.corpus import band_limited
from multiscale_sobolev.fields import make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[1, 2, 3], ids=lambda d: f"n{d}")
def dim(request):
    return request.param


def unit_grid(dim, size):
    return make_grid(dim, [size] * dim, [1.0] * dim)


def band_field(dim, size, seed=0, kmax=6):
    return band_limited(unit_grid(dim, size), np.random.default_rng(seed), kmax=kmax)


def ball_samples(rng, dim, count):
    """Uniform points of the unit ball."""
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * rng.uniform(size=(count, 1)) ** (1.0 / dim)
