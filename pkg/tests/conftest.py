import numpy as np
import pytest
from hypothesis import settings

from l1tcl.data import Dataset, DomainPair

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def make_dataset(n=40, d=3, seed=0, p=0.5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    z = (rng.random(n) < p).astype(float)
    z[0], z[1] = 1.0, 0.0
    y = rng.normal(size=n) + z
    return Dataset(X, z, y)


@pytest.fixture
def small_pair():
    return DomainPair(make_dataset(60, 3, seed=1), make_dataset(300, 3, seed=2))
