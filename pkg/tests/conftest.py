import numpy as np
import pytest

from slar.dist import DiscreteSymmetric, DistributionSpec, TwoPoint


@pytest.fixture
def flip_spec():
    """Finite spec with one strong feature and six weak, strictly non-robust ones."""
    feats = [TwoPoint(0.6)]
    for j in range(6):
        mu_j = 0.02 + 0.004 * j
        feats.append(DiscreteSymmetric(values=(mu_j - 0.05, mu_j + 0.05), probs=(0.5, 0.5)))
    return DistributionSpec(tuple(feats)), 0.1, 0.01  # spec, eps, lam


@pytest.fixture
def tiny_rng():
    return np.random.Generator(np.random.Philox(key=1234))
