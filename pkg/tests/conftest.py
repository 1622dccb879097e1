import numpy as np
import pytest

from latentmix.core import RandomSource, make_schedule

# Desk-scale schedule: noisy terminal level (alpha_bar_T ~ 7.7e-5) at T=64,
# small enough for exhaustive sweeps in tests.
DESK_T = 64
DESK_SHAPE = (4, 8, 8)


@pytest.fixture
def desk_schedule():
    return make_schedule(DESK_T, 0.02, 0.25, "linear")


@pytest.fixture
def rng():
    return RandomSource(1234)


def random_latent(rng: RandomSource, shape=DESK_SHAPE) -> np.ndarray:
    return rng.normal(shape)
