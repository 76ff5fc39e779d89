import functools

import pytest

from peakwave.waveprofile import Grid, smooth_profile


@functools.lru_cache(maxsize=None)
def cached_profile(c: float, n_half: int):
    return smooth_profile(c, Grid(n_half))


@pytest.fixture(scope="session")
def profile_103():
    return cached_profile(1.03, 300)


@pytest.fixture(scope="session")
def profile_107():
    return cached_profile(1.07, 300)
