import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikeslab import Dataset, Prior


@pytest.fixture
def small_prior():
    return Prior(q=0.3, tau0=0.3, tau1=2.5, sigma=1.0)


def random_dataset(n, p, rng, k=0, signal=2.0, sigma=1.0, normalize=False):
    X = rng.standard_normal((n, p))
    if normalize:
        X *= np.sqrt(n) / np.linalg.norm(X, axis=0)
    beta = np.zeros(p)
    y = X @ beta + sigma * rng.standard_normal(n)
    if k:
        beta[:k] = signal * rng.choice([-1.0, 1.0], size=k)
        y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(X=X, y=y)
