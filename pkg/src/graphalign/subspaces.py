"""Subspaces of R^N spanned by features, graph and ground truth.

The three data ingredients are turned into orthonormal bases: top
eigenvectors of the normalized adjacency for the graph, top left singular
vectors of the (uncentered) feature and label matrices for the other two.
Principal angles between the bases give pairwise subspace distances, and
the Frobenius norm of the 3x3 distance matrix is the alignment measure.
The subspace dimensions are picked to maximize the gap between the
original data and a fully randomized null ensemble.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .datasets import Dataset, one_hot, row_normalize_features
from .randomize import derive_seed, randomize_features, randomize_graph

__all__ = [
    "METRICS",
    "NormalizedAdjacency",
    "OrthonormalBasis",
    "PrincipalAngles",
    "DistanceMatrix3",
    "AlignmentResult",
    "normalized_adjacency",
    "graph_spectrum",
    "graph_basis",
    "left_singular_factor",
    "feature_basis",
    "groundtruth_basis",
    "principal_angles",
    "subspace_distance",
    "distance_matrix",
    "sam",
    "alignment_at",
    "dimension_grid",
    "optimize_dimensions",
]

METRICS = ("chordal", "grassmann", "projection")

# Alias kept for signature clarity: the normalized operator is a plain
# dense symmetric ndarray with spectrum in [-1, 1].
NormalizedAdjacency = np.ndarray


@dataclass(frozen=True)
class OrthonormalBasis:
    """k orthonormal columns spanning a subspace of R^n, with k < n."""

    matrix: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def validate(self, tol: float = 1e-10) -> None:
        n, k = self.matrix.shape
        if k >= n:
            raise ValueError("basis dimension must be strictly below the ambient dimension")
        gram = self.matrix.T @ self.matrix
        if np.abs(gram - np.eye(k)).max() > tol:
            raise ValueError("columns are not orthonormal")


@dataclass(frozen=True)
class PrincipalAngles:
    """Nondecreasing canonical angles between two subspaces, in [0, pi/2]."""

    angles: np.ndarray


@dataclass(frozen=True)
class DistanceMatrix3:
    """Symmetric 3x3 matrix of pairwise distances, indexed (X, A_hat, Y)."""

    values: np.ndarray

    @property
    def d_xa(self) -> float:
        return float(self.values[0, 1])

    @property
    def d_xy(self) -> float:
        return float(self.values[0, 2])

    @property
    def d_ay(self) -> float:
        return float(self.values[1, 2])


@dataclass(frozen=True)
class AlignmentResult:
    """Optimal subspace dimensions with the distances and SAM at them."""

    k_star_x: int
    k_star_a: int
    k_star_y: int
    distances: DistanceMatrix3
    sam: float
    metric: str

    def to_dict(self) -> dict:
        return {
            "k_star_x": self.k_star_x,
            "k_star_a": self.k_star_a,
            "k_star_y": self.k_star_y,
            "d_xa": self.distances.d_xa,
            "d_xy": self.distances.d_xy,
            "d_ay": self.distances.d_ay,
            "sam": self.sam,
            "metric": self.metric,
        }


def normalized_adjacency(adjacency: sp.spmatrix | np.ndarray) -> np.ndarray:
    """Self-loop augmented, symmetrically degree-normalized graph operator.

    Returns the dense matrix D^{-1/2} (A + I) D^{-1/2} where D holds the
    degrees after the self-loops are added, so every diagonal entry of D
    is at least one and the inverse square root always exists.
    """
    if sp.issparse(adjacency):
        a = adjacency.toarray()
    else:
        a = np.asarray(adjacency, dtype=np.float64)
    n = a.shape[0]
    a_tilde = a + np.eye(n)
    inv_sqrt_deg = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]


def _fix_signs(matrix: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry of each is positive."""
    m = matrix.copy()
    lead = np.abs(m).argmax(axis=0)
    flip = m[lead, np.arange(m.shape[1])] < 0
    m[:, flip] *= -1.0
    return m


def graph_spectrum(a_hat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of the normalized adjacency.

    Eigenvalues come back sorted by decreasing algebraic value; ties keep
    the eigensolver's original order (stable sort), and each eigenvector's
    largest-magnitude entry is made positive, so the output is
    deterministic even for degenerate spectra.
    """
    w, v = scipy.linalg.eigh(a_hat)
    order = np.argsort(-w, kind="stable")
    return w[order], _fix_signs(v[:, order])


def graph_basis(a_hat: np.ndarray, k: int) -> OrthonormalBasis:
    """Eigenvectors of the k algebraically largest eigenvalues of A_hat."""
    n = a_hat.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got k={k}")
    _, v = graph_spectrum(a_hat)
    return OrthonormalBasis(v[:, :k])


def left_singular_factor(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All left singular vectors (sign-fixed) and singular values."""
    u, s, _ = np.linalg.svd(np.asarray(matrix, dtype=np.float64), full_matrices=False)
    return _fix_signs(u), s


def feature_basis(x: np.ndarray, k: int) -> OrthonormalBasis:
    """Left singular vectors of the uncentered matrix for the k largest
    singular values (principal directions without mean removal)."""
    n, c = x.shape
    if k > c:
        raise ValueError(f"k={k} exceeds the column count {c}")
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got k={k}")
    u, _ = left_singular_factor(x)
    return OrthonormalBasis(u[:, :k])


def groundtruth_basis(y: np.ndarray, k: int | None = None) -> OrthonormalBasis:
    """Basis of the label subspace; k defaults to the class count."""
    if k is None:
        k = y.shape[1]
    return feature_basis(y, k)


def principal_angles(b1: OrthonormalBasis, b2: OrthonormalBasis) -> PrincipalAngles:
    """Canonical angles between two subspaces, sorted nondecreasing.

    Delegates to scipy.linalg.subspace_angles, which pairs the cosine
    SVD of B1^T B2 with a sine-based formulation for the small angles,
    so nearly identical subspaces come out at machine precision instead
    of the sqrt(eps) floor a plain arccos would give. Returns
    min(k1, k2) angles.
    """
    if b1.ambient_dim != b2.ambient_dim:
        raise ValueError(
            f"ambient dimension mismatch: {b1.ambient_dim} vs {b2.ambient_dim}"
        )
    angles = scipy.linalg.subspace_angles(b1.matrix, b2.matrix)
    return PrincipalAngles(np.sort(angles))


def subspace_distance(angles: PrincipalAngles | np.ndarray, metric: str = "chordal") -> float:
    """Distance derived from principal angles.

    chordal:    sqrt(sum sin^2)  -- uses all angles
    grassmann:  sqrt(sum theta^2) -- uses all angles
    projection: sin(max theta)    -- extremal, largest angle only
    """
    theta = angles.angles if isinstance(angles, PrincipalAngles) else np.asarray(angles)
    if metric == "chordal":
        return float(np.sqrt(np.sum(np.sin(theta) ** 2)))
    if metric == "grassmann":
        return float(np.sqrt(np.sum(theta ** 2)))
    if metric == "projection":
        return float(np.sin(theta.max()))
    raise ValueError(f"unknown metric: {metric!r} (expected one of {METRICS})")


def distance_matrix(
    basis_x: OrthonormalBasis,
    basis_a: OrthonormalBasis,
    basis_y: OrthonormalBasis,
    metric: str = "chordal",
) -> DistanceMatrix3:
    """All pairwise subspace distances, arranged symmetrically."""
    d_xa = subspace_distance(principal_angles(basis_x, basis_a), metric)
    d_xy = subspace_distance(principal_angles(basis_x, basis_y), metric)
    d_ay = subspace_distance(principal_angles(basis_a, basis_y), metric)
    values = np.array(
        [
            [0.0, d_xa, d_xy],
            [d_xa, 0.0, d_ay],
            [d_xy, d_ay, 0.0],
        ]
    )
    return DistanceMatrix3(values)


def sam(distances: DistanceMatrix3) -> float:
    """Subspace alignment measure: Frobenius norm of the distance matrix."""
    return float(np.linalg.norm(distances.values, "fro"))


def alignment_at(dataset: Dataset, kx: int, ka: int, metric: str = "chordal") -> AlignmentResult:
    """Alignment at explicitly chosen dimensions, skipping optimization.

    The label dimension is always the class count. Features enter the
    subspace analysis row-normalized, the same preprocessing the
    classifier sees.
    """
    f = dataset.num_classes
    basis_x = feature_basis(row_normalize_features(dataset.features), kx)
    basis_a = graph_basis(normalized_adjacency(dataset.adjacency), ka)
    basis_y = groundtruth_basis(one_hot(dataset.labels, f))
    distances = distance_matrix(basis_x, basis_a, basis_y, metric)
    return AlignmentResult(
        k_star_x=kx,
        k_star_a=ka,
        k_star_y=f,
        distances=distances,
        sam=sam(distances),
        metric=metric,
    )


def dimension_grid(lo: int, hi: int, points: int) -> np.ndarray:
    """Equally spaced integer grid on [lo, hi] including both endpoints.

    Real-valued spacing is floored to integers and duplicates are removed,
    so short intervals can yield fewer than `points` values.
    """
    if points < 1:
        raise ValueError("need at least one grid point")
    if hi < lo:
        raise ValueError(f"empty grid interval [{lo}, {hi}]")
    values = np.floor(np.linspace(lo, hi, points)).astype(int)
    return np.unique(values)


def _angles_from_cross(cross: np.ndarray) -> np.ndarray:
    cosines = scipy.linalg.svdvals(cross)
    return np.sort(np.arccos(np.clip(cosines, 0.0, 1.0)))


def _sq_distance_grids(
    u: np.ndarray,
    v: np.ndarray,
    y: np.ndarray,
    kx_grid: np.ndarray,
    ka_grid: np.ndarray,
    metric: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Squared pairwise distances for every (k_x, k_a) grid cell.

    `u`, `v`, `y` are full orthonormal factors (features, graph, labels);
    a cell's basis is a column prefix, so its cross-product is a leading
    submatrix of the full cross-product and all cells share three matrix
    products. For the chordal metric the squared distance
    sum_j sin^2(theta_j) = alpha - ||cross||_F^2 falls out of cumulative
    sums without any per-cell SVD; the other metrics need the angles.
    """
    kx_max, ka_max = int(kx_grid[-1]), int(ka_grid[-1])
    f = y.shape[1]
    m_xa = u[:, :kx_max].T @ v[:, :ka_max]
    m_xy = u[:, :kx_max].T @ y
    m_ay = v[:, :ka_max].T @ y

    if metric == "chordal":
        cum = np.cumsum(np.cumsum(m_xa**2, axis=0), axis=1)
        alpha = np.minimum(kx_grid[:, None], ka_grid[None, :]).astype(float)
        d2_xa = np.clip(alpha - cum[kx_grid - 1][:, ka_grid - 1], 0.0, None)
        row_xy = np.cumsum((m_xy**2).sum(axis=1))
        d2_xy = np.clip(f - row_xy[kx_grid - 1], 0.0, None)
        row_ay = np.cumsum((m_ay**2).sum(axis=1))
        d2_ay = np.clip(f - row_ay[ka_grid - 1], 0.0, None)
        return d2_xa, d2_xy, d2_ay

    d2_xa = np.empty((len(kx_grid), len(ka_grid)))
    for i, kx in enumerate(kx_grid):
        for j, ka in enumerate(ka_grid):
            theta = _angles_from_cross(m_xa[:kx, :ka])
            d2_xa[i, j] = subspace_distance(theta, metric) ** 2
    d2_xy = np.array(
        [subspace_distance(_angles_from_cross(m_xy[:kx, :]), metric) ** 2 for kx in kx_grid]
    )
    d2_ay = np.array(
        [subspace_distance(_angles_from_cross(m_ay[:ka, :]), metric) ** 2 for ka in ka_grid]
    )
    return d2_xa, d2_xy, d2_ay


def _sam_grid(
    u: np.ndarray,
    v: np.ndarray,
    y: np.ndarray,
    kx_grid: np.ndarray,
    ka_grid: np.ndarray,
    metric: str,
) -> np.ndarray:
    d2_xa, d2_xy, d2_ay = _sq_distance_grids(u, v, y, kx_grid, ka_grid, metric)
    return np.sqrt(2.0 * (d2_xa + d2_xy[:, None] + d2_ay[None, :]))


def _null_realization(dataset: Dataset, seed: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Left factors (features, graph) of one fully randomized copy."""
    x_null = randomize_features(dataset.features, 100.0, derive_seed(seed, index, 0))
    a_null = randomize_graph(dataset.adjacency, 100.0, derive_seed(seed, index, 1))
    u, _ = left_singular_factor(row_normalize_features(x_null))
    _, v = graph_spectrum(normalized_adjacency(a_null))
    return u, v


def optimize_dimensions(
    dataset: Dataset,
    metric: str = "chordal",
    n_null: int = 100,
    grid_points: int = 10,
    rounds: int = 2,
    seed: int = 0,
) -> AlignmentResult:
    """Pick subspace dimensions maximizing discrimination from the null model.

    The label dimension is pinned to the class count. The feature and graph
    dimensions are scanned jointly on an integer grid (class count up to the
    feature count, respectively the node count minus one); the objective at
    each cell is the mean alignment measure over `n_null` fully randomized
    copies minus the measure of the original data, and the argmax wins.
    Each later round re-grids the interval between the neighbors of the
    previous argmax. Features are row-normalized before the decomposition,
    matching the classifier's preprocessing. Deterministic per seed.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric: {metric!r}")
    if n_null < 1:
        raise ValueError("need at least one null realization")
    n, f = dataset.n_nodes, dataset.num_classes
    kx_hi = min(dataset.n_features, n - 1)
    ka_hi = n - 1

    y = one_hot(dataset.labels, f)
    y_basis = groundtruth_basis(y)
    u_orig, _ = left_singular_factor(row_normalize_features(dataset.features))
    _, v_orig = graph_spectrum(normalized_adjacency(dataset.adjacency))

    kx_grid = dimension_grid(f, kx_hi, grid_points)
    ka_grid = dimension_grid(f, ka_hi, grid_points)
    n_rounds = max(1, rounds)
    kx_best = ka_best = f
    for round_index in range(n_rounds):
        objective = -_sam_grid(u_orig, v_orig, y_basis.matrix, kx_grid, ka_grid, metric)
        for r in range(n_null):
            u_null, v_null = _null_realization(dataset, seed, r)
            objective += (
                _sam_grid(u_null, v_null, y_basis.matrix, kx_grid, ka_grid, metric) / n_null
            )
        ix, ia = np.unravel_index(int(np.argmax(objective)), objective.shape)
        kx_best, ka_best = int(kx_grid[ix]), int(ka_grid[ia])
        if round_index + 1 < n_rounds:
            # Next round re-grids the interval between the argmax's neighbors,
            # clipped to the current grid at the boundaries.
            kx_grid = dimension_grid(
                int(kx_grid[max(ix - 1, 0)]),
                int(kx_grid[min(ix + 1, len(kx_grid) - 1)]),
                grid_points,
            )
            ka_grid = dimension_grid(
                int(ka_grid[max(ia - 1, 0)]),
                int(ka_grid[min(ia + 1, len(ka_grid) - 1)]),
                grid_points,
            )

    basis_x = OrthonormalBasis(u_orig[:, :kx_best])
    basis_a = OrthonormalBasis(v_orig[:, :ka_best])
    distances = distance_matrix(basis_x, basis_a, y_basis, metric)
    return AlignmentResult(
        k_star_x=kx_best,
        k_star_a=ka_best,
        k_star_y=f,
        distances=distances,
        sam=sam(distances),
        metric=metric,
    )
