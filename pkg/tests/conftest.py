import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sskpca.cqp import CqpProblem

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_problem(rng, m, rank_deficit=1, s2=None):
    """C = A A^T + 0.1 m I (PD), P = B B^T with rank m - rank_deficit."""
    a = rng.standard_normal((m, m))
    c = a @ a.T + 0.1 * m * np.eye(m)
    bmat = rng.standard_normal((m, m - rank_deficit))
    p = bmat @ bmat.T
    b = rng.standard_normal(m)
    if s2 is None:
        s2 = float(rng.uniform(0.5, 5.0))
    return CqpProblem(c, b, p, s2)


def random_spd(rng, m, shift=0.1):
    a = rng.standard_normal((m, m))
    return a @ a.T + shift * np.eye(m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)
