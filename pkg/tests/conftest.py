import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_spsd(rng, n, rank=None, decay=None):
    """Random SPSD matrix; optional rank truncation or geometric eigenvalue decay."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    if decay is not None:
        lam = decay ** np.arange(n)
    else:
        lam = rng.uniform(0.1, 2.0, n)
    if rank is not None:
        lam[rank:] = 0.0
    return (Q * lam) @ Q.T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


seeds = st.integers(min_value=0, max_value=2**32 - 1)
