from functools import lru_cache

import numpy as np
import pytest

from agpwaves.anderson import assemble
from agpwaves.noise import BARE, enhance, sample_noise, zero_noise
from agpwaves.spectral import BasisSpec


@lru_cache(maxsize=None)
def form(dim, cutoff, seed=None, mode=None):
    """Cached AndersonForm; seed None means xi = 0 in bare mode."""
    basis = BasisSpec(dim, cutoff)
    if seed is None:
        return assemble(enhance(zero_noise(basis), BARE))
    return assemble(enhance(sample_noise(seed, basis), mode))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def smooth_coeffs(basis, rng, decay=0.25, complex_=False):
    lam2 = basis.eigenvalues
    c = rng.standard_normal(lam2.size)
    if complex_:
        c = c + 1j * rng.standard_normal(lam2.size)
    return c * np.exp(-decay * lam2)
