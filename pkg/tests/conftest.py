import numpy as np
import pytest
import scipy.sparse as sp

from graphalign import ConstructiveSpec, Dataset, generate_constructive


def make_dataset(n=8, c=4, f=2, edges=((0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7), (0, 4)),
                 seed=0):
    """Small handmade dataset; features random, labels split in halves."""
    rng = np.random.default_rng(seed)
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    labels = np.array([i * f // n for i in range(n)])
    return Dataset(
        node_ids=[f"v{i}" for i in range(n)],
        features=rng.random((n, c)),
        adjacency=sp.csr_matrix(a),
        labels=labels,
        num_classes=f,
    )


@pytest.fixture
def tiny_dataset():
    return make_dataset()


@pytest.fixture(scope="session")
def small_constructive():
    """Scaled-down planted-community instance for mid-cost tests."""
    spec = ConstructiveSpec(n_nodes=200, n_communities=4, n_features=40,
                            features_per_community=10, p_in=0.2, p_out=0.02, seed=0)
    return generate_constructive(spec)


@pytest.fixture(scope="session")
def constructive():
    """The full-size benchmark instance (seed 0)."""
    return generate_constructive(ConstructiveSpec())
