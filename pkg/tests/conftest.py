import numpy as np
import pytest
from hypothesis import strategies as st

from qeraser.gaussian import GaussianState


def random_single_mode(rng: np.random.Generator, max_db: float = 8.0, max_thermal: float = 2.0) -> GaussianState:
    """Random physical single-mode state: rotated squeezed thermal, displaced."""
    db = rng.uniform(-max_db, max_db)
    theta = rng.uniform(0, np.pi)
    nu = rng.uniform(1.0, max_thermal)
    vx = 0.25 * 10 ** (db / 10)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    cov = nu * rot @ np.diag([vx, 0.0625 / vx]) @ rot.T
    return GaussianState(rng.uniform(-2, 2, size=2), cov)


@st.composite
def single_mode_states(draw):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_single_mode(np.random.default_rng(seed))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
