"""Controlled degradation of graph structure and node features.

Both procedures scramble a chosen percentage of the information while
holding everything else fixed: graph rewiring re-pairs edge stubs so the
degree sequence of the rewired part is preserved (before cleanup), and
feature randomization permutes whole rows so the multiset of feature
vectors, and hence the feature spectrum, is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "RandomizationSpec",
    "randomize_graph",
    "randomize_features",
    "derive_seed",
    "derived_rng",
]


@dataclass(frozen=True)
class RandomizationSpec:
    """Percentages (0..100) of graph and feature randomization plus a seed."""

    p_graph: float = 0.0
    p_features: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.p_graph <= 100 and 0 <= self.p_features <= 100):
            raise ValueError("randomization percentages must lie in [0, 100]")


def derive_seed(base_seed: int, *parts: int) -> int:
    """Deterministic child seed for (base_seed, *parts).

    This is the documented splitting rule for parallel sweeps: every
    (realization, stage) pair hashes to an independent stream.
    """
    ss = np.random.SeedSequence((base_seed, *parts))
    return int(ss.generate_state(1, np.uint64)[0])


def derived_rng(base_seed: int, *parts: int) -> np.random.Generator:
    """Generator seeded by the splitting rule of :func:`derive_seed`."""
    return np.random.default_rng(np.random.SeedSequence((base_seed, *parts)))


def _edge_array(adjacency: sp.spmatrix) -> np.ndarray:
    """Undirected edges as an (m, 2) array of index pairs with i < j."""
    coo = sp.triu(adjacency, k=1).tocoo()
    return np.column_stack([coo.row, coo.col]).astype(np.int64)


def rewire_stubs(edges: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Uniform stub re-pairing of an edge set.

    Each edge contributes two stubs (half-edges); the pooled stub list is
    shuffled and paired off into new edges. Every node keeps exactly its
    degree from `edges`, so the pre-cleanup degree sequence is preserved.
    The result may contain self-loops and parallel edges.
    """
    if len(edges) == 0:
        return edges.reshape(0, 2)
    stubs = edges.reshape(-1)
    shuffled = stubs[rng.permutation(stubs.shape[0])]
    return shuffled.reshape(-1, 2)


def randomize_graph(adjacency: sp.spmatrix, p_graph: float, seed: int) -> sp.csr_matrix:
    """Rewire a percentage of the graph's edge stubs, degree-preservingly.

    Selects floor(|E| * p/100) edges, re-pairs their stubs at random, then
    merges with the untouched edges and removes self-loops and parallel
    edges. The output is symmetric and simple; its edge count never
    exceeds the input's. p=0 returns the graph unchanged.
    """
    if not (0 <= p_graph <= 100):
        raise ValueError("p_graph must lie in [0, 100]")
    adjacency = adjacency.tocsr()
    edges = _edge_array(adjacency)
    m = len(edges)
    n_rewire = int(np.floor(m * p_graph / 100.0))
    if n_rewire == 0:
        return adjacency.copy()

    rng = np.random.default_rng(seed)
    chosen = rng.choice(m, size=n_rewire, replace=False)
    keep_mask = np.ones(m, dtype=bool)
    keep_mask[chosen] = False
    rewired = rewire_stubs(edges[chosen], rng)

    final: set[tuple[int, int]] = set()
    for u, v in edges[keep_mask]:
        final.add((int(u), int(v)))
    for u, v in rewired:
        if u == v:
            continue  # self-loop from the pairing: dropped in cleanup
        final.add((min(int(u), int(v)), max(int(u), int(v))))

    n = adjacency.shape[0]
    if not final:
        return sp.csr_matrix((n, n))
    idx = np.array(sorted(final), dtype=np.int64)
    data = np.ones(len(idx))
    a = sp.coo_matrix((data, (idx[:, 0], idx[:, 1])), shape=(n, n))
    a = a + a.T
    a = a.tocsr()
    a.data[:] = 1.0
    return a


def randomize_features(features: np.ndarray, p_features: float, seed: int) -> np.ndarray:
    """Swap the feature vectors of a percentage of randomly chosen nodes.

    floor(N * p/100) distinct rows are drawn uniformly and receive a
    uniform random permutation of themselves; all other rows are left
    untouched. The multiset of rows (and therefore the singular value
    spectrum) is preserved exactly. p=0 returns a copy of the input.
    """
    if not (0 <= p_features <= 100):
        raise ValueError("p_features must lie in [0, 100]")
    x = np.array(features, copy=True)
    n = x.shape[0]
    n_swap = int(np.floor(n * p_features / 100.0))
    if n_swap == 0:
        return x
    rng = np.random.default_rng(seed)
    rows = rng.choice(n, size=n_swap, replace=False)
    x[rows] = x[rows[rng.permutation(n_swap)]]
    return x
