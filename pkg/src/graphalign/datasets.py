"""Dataset model: features + graph + ground truth, loaders and transforms.

A dataset couples a node-feature matrix X (N x C0), an undirected simple
graph given by its 0/1 adjacency matrix (N x N), and an integer class
label per node. All loaders and generators normalize into this one
in-memory form; everything downstream (randomization, subspace analysis,
model training) consumes it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Dataset",
    "ConstructiveSpec",
    "DatasetFormatError",
    "load_dataset",
    "save_dataset",
    "largest_connected_component",
    "generate_constructive",
    "row_normalize_features",
    "one_hot",
    "apply_limiting_case",
    "LIMITING_CASES",
]

LIMITING_CASES = ("no_graph", "complete_graph", "no_features")


class DatasetFormatError(ValueError):
    """Raised for malformed dataset files (ragged rows, unknown ids, ...)."""


@dataclass(eq=False)
class Dataset:
    """Features, graph and ground truth for one node-classification problem.

    Attributes:
        node_ids: unique opaque string id per node, length N.
        features: dense real matrix, N x C0.
        adjacency: symmetric 0/1 CSR matrix, N x N, zero diagonal.
        labels: integer vector of length N with values in [0, num_classes).
        num_classes: number of ground-truth classes F.
    """

    node_ids: list[str]
    features: np.ndarray
    adjacency: sp.csr_matrix
    labels: np.ndarray
    num_classes: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    def validate(self) -> None:
        """Check the structural invariants; raise ValueError on violation."""
        n = self.n_nodes
        if len(set(self.node_ids)) != n:
            raise ValueError("node ids are not unique")
        if self.features.shape[0] != n or self.labels.shape[0] != n:
            raise ValueError("features/labels length does not match node count")
        if self.adjacency.shape != (n, n):
            raise ValueError("adjacency shape does not match node count")
        a = self.adjacency
        if a.diagonal().any():
            raise ValueError("adjacency has nonzero diagonal")
        if (a != a.T).nnz != 0:
            raise ValueError("adjacency is not symmetric")
        if a.nnz and not np.all(a.data == 1):
            raise ValueError("adjacency entries must be 0/1")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.labels.min(initial=0) < 0 or self.labels.max(initial=0) >= self.num_classes:
            raise ValueError("labels out of range")


@dataclass(frozen=True)
class ConstructiveSpec:
    """Parameters of the planted-community benchmark generator.

    Graph and features share one stochastic block structure: node blocks of
    size n_nodes/n_communities, feature blocks of size features_per_community,
    with within-block probability p_in and p_out elsewhere.
    """

    n_nodes: int = 1000
    n_communities: int = 10
    n_features: int = 500
    features_per_community: int = 50
    p_in: float = 0.07
    p_out: float = 0.007
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_nodes % self.n_communities:
            raise ValueError("n_nodes must be divisible by n_communities")
        if self.features_per_community * self.n_communities != self.n_features:
            raise ValueError("features_per_community * n_communities must equal n_features")
        if not (0.0 <= self.p_out <= self.p_in <= 1.0):
            raise ValueError("need 0 <= p_out <= p_in <= 1")


def _edges_to_adjacency(n: int, edges: set[tuple[int, int]]) -> sp.csr_matrix:
    """Build a symmetric 0/1 CSR matrix from a set of (i < j) index pairs."""
    if not edges:
        return sp.csr_matrix((n, n))
    rows = np.fromiter((e[0] for e in edges), dtype=np.int64, count=len(edges))
    cols = np.fromiter((e[1] for e in edges), dtype=np.int64, count=len(edges))
    data = np.ones(len(edges))
    a = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    a = a + a.T
    a = a.tocsr()
    a.data[:] = 1.0
    return a


def _read_edge_list(path: Path, index: dict[str, int]) -> set[tuple[int, int]]:
    edges: set[tuple[int, int]] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) != 2:
                raise DatasetFormatError(
                    f"{path}:{lineno}: expected two node ids, got {len(tokens)} tokens"
                )
            try:
                u, v = index[tokens[0]], index[tokens[1]]
            except KeyError as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: unknown node id {exc.args[0]!r}"
                ) from None
            if u == v:
                continue  # self-loop: dropped
            edges.add((min(u, v), max(u, v)))
    return edges


def _load_cora_content(path: Path) -> tuple[list[str], np.ndarray, np.ndarray, int]:
    """Parse `<id> <binary features...> <class-name>` rows.

    Class names map to label indices in lexicographic order so the indexing
    is reproducible across runs and machines.
    """
    ids: list[str] = []
    rows: list[list[float]] = []
    class_names: list[str] = []
    width = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) < 3:
                raise DatasetFormatError(
                    f"{path}:{lineno}: need id, features and a label column"
                )
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DatasetFormatError(
                    f"{path}:{lineno}: ragged row ({len(tokens)} columns, expected {width})"
                )
            ids.append(tokens[0])
            try:
                rows.append([float(t) for t in tokens[1:-1]])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}:{lineno}: non-numeric feature value"
                ) from None
            class_names.append(tokens[-1])
    if not ids:
        raise DatasetFormatError(f"{path}: empty content file")
    classes = sorted(set(class_names))
    class_index = {c: i for i, c in enumerate(classes)}
    labels = np.array([class_index[c] for c in class_names], dtype=np.int64)
    return ids, np.asarray(rows, dtype=np.float64), labels, len(classes)


def _load_generic_features(path: Path) -> tuple[list[str], np.ndarray, np.ndarray, int]:
    """Parse `<id> <v1> ... <vC> <integer label>` rows."""
    ids: list[str] = []
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if len(tokens) < 3:
                raise DatasetFormatError(
                    f"{path}:{lineno}: need id, features and a label column"
                )
            if width is None:
                width = len(tokens)
            elif len(tokens) != width:
                raise DatasetFormatError(
                    f"{path}:{lineno}: ragged row ({len(tokens)} columns, expected {width})"
                )
            ids.append(tokens[0])
            try:
                rows.append([float(t) for t in tokens[1:-1]])
            except ValueError:
                raise DatasetFormatError(
                    f"{path}:{lineno}: non-numeric feature value"
                ) from None
            try:
                labels.append(int(tokens[-1]))
            except ValueError:
                raise DatasetFormatError(
                    f"{path}:{lineno}: label column must be an integer"
                ) from None
    if not ids:
        raise DatasetFormatError(f"{path}: empty features file")
    lab = np.array(labels, dtype=np.int64)
    if lab.min() < 0:
        raise DatasetFormatError(f"{path}: negative label")
    return ids, np.asarray(rows, dtype=np.float64), lab, int(lab.max()) + 1


def load_dataset(edges_path: str | Path, features_path: str | Path,
                 format: str = "generic") -> Dataset:
    """Load a dataset from an edge list plus a per-node feature/label file.

    `format="cora"` reads the published content/cites layout (features are
    0/1, label is a class name, edges are `<cited> <citing>`).
    `format="generic"` reads `<id> <v1> ... <vC> <label>` feature rows and
    whitespace-separated id pairs for edges.

    Duplicate edges collapse, self-loops drop, and edges are undirected.
    Every edge endpoint must appear in the features file.
    """
    edges_path, features_path = Path(edges_path), Path(features_path)
    if format == "cora":
        ids, features, labels, num_classes = _load_cora_content(features_path)
    elif format == "generic":
        ids, features, labels, num_classes = _load_generic_features(features_path)
    else:
        raise ValueError(f"unknown dataset format: {format!r}")
    if len(set(ids)) != len(ids):
        raise DatasetFormatError(f"{features_path}: duplicate node ids")
    index = {node: i for i, node in enumerate(ids)}
    edges = _read_edge_list(edges_path, index)
    d = Dataset(
        node_ids=ids,
        features=features,
        adjacency=_edges_to_adjacency(len(ids), edges),
        labels=labels,
        num_classes=num_classes,
    )
    d.validate()
    return d


def save_dataset(dataset: Dataset, edges_path: str | Path, features_path: str | Path) -> None:
    """Write a dataset in the generic text format (round-trips bit-exactly)."""
    with Path(features_path).open("w", encoding="utf-8") as fh:
        for i, node in enumerate(dataset.node_ids):
            values = " ".join(repr(float(v)) for v in dataset.features[i])
            fh.write(f"{node} {values} {int(dataset.labels[i])}\n")
    coo = sp.triu(dataset.adjacency, k=1).tocoo()
    with Path(edges_path).open("w", encoding="utf-8") as fh:
        for i, j in zip(coo.row, coo.col):
            fh.write(f"{dataset.node_ids[i]} {dataset.node_ids[j]}\n")


def largest_connected_component(dataset: Dataset) -> Dataset:
    """Restrict to the largest connected component of the graph.

    Ties between equally large components go to the one containing the
    smallest node index, so the result is deterministic.
    """
    n_comp, membership = connected_components(dataset.adjacency, directed=False)
    if n_comp <= 1:
        return dataset
    sizes = np.bincount(membership, minlength=n_comp)
    # np.argmax returns the first maximal component; components are labeled
    # in order of first appearance, so this is the tie-break by smallest index.
    first_of_max = np.flatnonzero(sizes == sizes.max())
    winner = min(first_of_max, key=lambda c: int(np.flatnonzero(membership == c)[0]))
    keep = np.flatnonzero(membership == winner)
    return Dataset(
        node_ids=[dataset.node_ids[i] for i in keep],
        features=dataset.features[keep].copy(),
        adjacency=dataset.adjacency[keep][:, keep].tocsr(),
        labels=dataset.labels[keep].copy(),
        num_classes=dataset.num_classes,
    )


def generate_constructive(spec: ConstructiveSpec) -> Dataset:
    """Generate the planted-community benchmark dataset.

    Community c owns the node block [c*N/K, (c+1)*N/K) and the feature
    block [c*features_per_community, (c+1)*features_per_community).
    Every intra-community edge and feature entry is present with
    probability p_in, everything else with p_out. Features are binary
    (a node either possesses a feature or it does not). Labels are the
    community indices. Deterministic per seed.
    """
    n, k = spec.n_nodes, spec.n_communities
    block = n // k
    labels = np.repeat(np.arange(k), block)

    rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 0)))
    same_community = labels[:, None] == labels[None, :]
    prob = np.where(same_community, spec.p_in, spec.p_out)
    draw = rng.random((n, n))
    upper = np.triu(draw < prob, k=1)
    adjacency = sp.csr_matrix(np.logical_or(upper, upper.T).astype(np.float64))

    rng_feat = np.random.default_rng(np.random.SeedSequence((spec.seed, 1)))
    feat_block = spec.features_per_community
    feature_owner = np.repeat(np.arange(k), feat_block)
    feat_prob = np.where(labels[:, None] == feature_owner[None, :], spec.p_in, spec.p_out)
    features = (rng_feat.random((n, spec.n_features)) < feat_prob).astype(np.float64)

    return Dataset(
        node_ids=[f"n{i}" for i in range(n)],
        features=features,
        adjacency=adjacency,
        labels=labels,
        num_classes=k,
    )


def expected_constructive_edges(spec: ConstructiveSpec) -> tuple[float, float]:
    """Expected (intra, inter) community edge counts for a generator spec."""
    n, k = spec.n_nodes, spec.n_communities
    within_pairs = k * math.comb(n // k, 2)
    across_pairs = math.comb(n, 2) - within_pairs
    return spec.p_in * within_pairs, spec.p_out * across_pairs


def row_normalize_features(features: np.ndarray) -> np.ndarray:
    """Scale each row to sum to 1; all-zero rows stay zero."""
    x = np.asarray(features, dtype=np.float64)
    sums = x.sum(axis=1, keepdims=True)
    out = np.divide(x, sums, out=np.zeros_like(x), where=sums != 0)
    return out


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """0-1 membership matrix, one row per node with a single 1."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"label out of range [0, {num_classes})")
    y = np.zeros((labels.shape[0], num_classes))
    y[np.arange(labels.shape[0]), labels] = 1.0
    return y


def apply_limiting_case(dataset: Dataset, case: str) -> Dataset:
    """Return a copy of the dataset under one of the limiting cases.

    no_graph:       A = 0 (the normalized operator becomes the identity)
    complete_graph: A = all-ones minus the diagonal
    no_features:    X = I_N (feature dimension becomes N)

    The input is never mutated and labels are preserved.
    """
    n = dataset.n_nodes
    if case == "no_graph":
        return replace(dataset, adjacency=sp.csr_matrix((n, n)))
    if case == "complete_graph":
        full = np.ones((n, n)) - np.eye(n)
        return replace(dataset, adjacency=sp.csr_matrix(full))
    if case == "no_features":
        return replace(dataset, features=np.eye(n))
    raise ValueError(f"unknown limiting case: {case!r} (expected one of {LIMITING_CASES})")
