import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def reachability_strong(A):
    """Boolean transitive closure; independent of scipy's csgraph."""
    R = (np.asarray(A) != 0) | np.eye(len(A), dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(len(A), 2)))) + 1):
        R = R | ((R.astype(int) @ R.astype(int)) > 0)
    return bool(R.all())
