import numpy as np
import pytest

from dilatron.markov import validate_stochastic

EXAMPLE2 = [[0.5, 0.5], [0.25, 0.75]]


@pytest.fixture
def example2():
    return validate_stochastic(EXAMPLE2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def oracle_product(mats, t):
    """Left-to-right product P(1)...P(t) by plain matmul."""
    out = np.eye(len(mats[0]))
    for m in mats[:t]:
        out = out @ np.asarray(m, dtype=float)
    return out
