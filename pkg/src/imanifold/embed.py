"""Distance matrices, SMACOF metric MDS and three local-geometry baselines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.spatial.distance import pdist, squareform

from .errors import ConnectivityError, ManifoldError, ShapeMismatchError, UndefinedStressError
from .sampling import SampleGrid

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 500
DEFAULT_KNN = 10
LLE_REG = 1e-3


@dataclass(eq=False)
class LatentManifold:
    """Ordered latent points tied to the grid they were sampled on.

    ``stress`` is the final normalized stress of the embedding against the
    distances it was fitted to (for the spectral baselines, against input
    Euclidean distances after an optimal global rescaling).
    """

    points: np.ndarray
    grid: SampleGrid | None = None
    stress: float = float("nan")
    provenance: dict = field(default_factory=dict)
    history: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ShapeMismatchError("latent points must be a 2-D array")
        if self.grid is not None and len(self.points) != self.grid.n:
            raise ShapeMismatchError(f"{len(self.points)} points for a grid of {self.grid.n} nodes")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def rms_norm(self) -> float:
        c = self.points - self.points.mean(axis=0)
        return float(np.sqrt((c ** 2).sum(axis=1).mean()))


def pairwise_distances(vectors) -> np.ndarray:
    """Euclidean distance matrix of row vectors (images are flattened first)."""
    try:
        X = np.asarray(vectors, dtype=float)
    except ValueError:
        raise ShapeMismatchError("vectors have unequal lengths") from None
    if X.dtype == object:
        raise ShapeMismatchError("vectors have unequal lengths")
    X = X.reshape(len(X), -1)
    if len(X) < 2:
        raise ShapeMismatchError("need at least two vectors")
    return squareform(pdist(X))


def check_distance_matrix(D, atol: float = 1e-9) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeMismatchError(f"distance matrix must be square, got {D.shape}")
    if not np.allclose(D, D.T, atol=atol, rtol=0):
        raise ManifoldError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(D)) > atol):
        raise ManifoldError("distance matrix has a nonzero diagonal")
    if np.any(D < -atol):
        raise ManifoldError("distance matrix has negative entries")
    return D


def normalized_stress(D, Z) -> float:
    """``sqrt(sum_{i<j} (d_ij - |z_i - z_j|)^2 / sum_{i<j} d_ij^2)``."""
    D = np.asarray(D, dtype=float)
    Z = np.asarray(Z, dtype=float).reshape(len(Z), -1)
    if D.shape != (len(Z), len(Z)):
        raise ShapeMismatchError(f"distance matrix {D.shape} does not match {len(Z)} points")
    d = squareform(D, checks=False)
    denom = float(np.sum(d ** 2))
    if denom == 0:
        raise UndefinedStressError("stress is undefined for an all-zero distance matrix")
    return float(np.sqrt(np.sum((d - pdist(Z)) ** 2) / denom))


def _smacof_run(D: np.ndarray, X: np.ndarray, tol: float, max_iter: int):
    n = len(D)
    d_c = squareform(D, checks=False)
    denom = float(d_c @ d_c)
    dist = pdist(X)
    raw = float(np.sum((d_c - dist) ** 2))
    history = [float(np.sqrt(raw / denom))]
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = squareform(np.where(dist > 0, d_c / dist, 0.0))
        # Guttman transform: B(X) X / n with B = diag(rowsum) - ratio
        X_new = (ratio.sum(axis=1)[:, None] * X - ratio @ X) / n
        dist_new = pdist(X_new)
        raw_new = float(np.sum((d_c - dist_new) ** 2))
        if raw_new > raw:
            # round-off at convergence; keep the better configuration
            break
        X, dist, raw = X_new, dist_new, raw_new
        prev = history[-1]
        history.append(float(np.sqrt(raw / denom)))
        if history[-1] == 0.0 or (prev - history[-1]) / prev < tol:
            break
    return X, history


def mds_smacof(D, d: int, seed: int = 0, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               n_init: int = 1, grid: SampleGrid | None = None, init=None) -> LatentManifold:
    """Metric MDS by iterated Guttman transforms.

    Each run starts from a Gaussian configuration drawn from
    ``default_rng(seed)`` (``n_init`` runs draw successively from the same
    generator) and stops when the relative decrease of normalized stress falls
    below ``tol``.  The run with the lowest final stress is returned, centered
    at the origin.  A step that would increase stress is never taken, so
    ``history`` is non-increasing.
    """
    D = check_distance_matrix(D)
    if d < 1:
        raise ManifoldError(f"latent dimension must be >= 1, got {d}")
    if tol <= 0:
        raise ManifoldError("tol must be positive")
    if not np.any(D > 0):
        raise UndefinedStressError("stress is undefined for an all-zero distance matrix")
    rng = np.random.default_rng(seed)
    best = None
    for run in range(n_init):
        X0 = np.asarray(init, dtype=float) if (init is not None and run == 0) else rng.standard_normal((len(D), d))
        X, hist = _smacof_run(D, X0, tol, max_iter)
        if best is None or hist[-1] < best[1][-1]:
            best = (X, hist)
    X, hist = best
    X = X - X.mean(axis=0)
    prov = {"method": "mds", "dim": d, "seed": seed, "tol": tol, "max_iter": max_iter,
            "n_init": n_init, "iterations": len(hist) - 1}
    return LatentManifold(X, grid, hist[-1], prov, hist)


def stress_scan(D, dims, seed: int = 0, **kw) -> list[tuple[int, float]]:
    """Final SMACOF stress for each latent dimension in ``dims`` (shared seed)."""
    dims = list(dims)
    if not dims or min(dims) < 1:
        raise ManifoldError("dims must be a nonempty list of positive integers")
    return [(d, mds_smacof(D, d, seed=seed, **kw).stress) for d in dims]


def elbow_dimension(scan: list[tuple[int, float]]) -> int:
    """Dimension farthest below the chord joining the first and last scan points."""
    dims = np.array([s[0] for s in scan], dtype=float)
    stress = np.array([s[1] for s in scan], dtype=float)
    if len(dims) < 3:
        return int(dims[0])
    x = (dims - dims[0]) / (dims[-1] - dims[0])
    span = stress[0] - stress[-1]
    y = (stress - stress[-1]) / span if span > 0 else np.zeros_like(stress)
    # chord from (0, 1) to (1, 0); distance below it is 1 - x - y
    return int(dims[int(np.argmax(1.0 - x - y))])


def knn_graph(vectors, k: int) -> csr_matrix:
    """Symmetrized k-nearest-neighbor graph weighted by Euclidean distance."""
    X = np.asarray(vectors, dtype=float).reshape(len(vectors), -1)
    n = len(X)
    if k < 1 or k >= n:
        raise ManifoldError(f"k must be in [1, {n - 1}], got {k}")
    D = pairwise_distances(X)
    np.fill_diagonal(D, np.inf)
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    W = np.zeros((n, n))
    W[rows, cols] = D[rows, cols]
    W = np.maximum(W, W.T)
    return csr_matrix(W)


def _require_connected(graph) -> None:
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        raise ConnectivityError(n_comp)


def graph_geodesics(graph) -> np.ndarray:
    """All-pairs shortest path lengths by per-source Dijkstra."""
    _require_connected(graph)
    return shortest_path(graph, method="D", directed=False)


def _scaled_stress(D, Z) -> float:
    d = squareform(D, checks=False)
    e = pdist(Z)
    c = float(d @ e / (e @ e)) if e @ e > 0 else 0.0
    return float(np.sqrt(np.sum((d - c * e) ** 2) / np.sum(d ** 2)))


def isomap(vectors, k: int = DEFAULT_KNN, d: int = 2, seed: int = 0, grid: SampleGrid | None = None,
           **smacof_kw) -> LatentManifold:
    """SMACOF embedding of k-NN graph geodesic distances."""
    if k < 2:
        raise ManifoldError(f"isomap needs k >= 2, got {k}")
    G = graph_geodesics(knn_graph(vectors, k))
    out = mds_smacof(G, d, seed=seed, grid=grid, **smacof_kw)
    out.provenance.update({"method": "isomap", "k": k})
    return out


def laplacian_eigenmaps(vectors, k: int = DEFAULT_KNN, d: int = 2, grid: SampleGrid | None = None) -> LatentManifold:
    """Eigenvectors 2..d+1 of the symmetric normalized Laplacian of the binary k-NN graph."""
    if k < 2:
        raise ManifoldError(f"laplacian eigenmaps needs k >= 2, got {k}")
    X = np.asarray(vectors, dtype=float).reshape(len(vectors), -1)
    graph = knn_graph(X, k)
    _require_connected(graph)
    W = (graph.toarray() > 0).astype(float)
    deg = W.sum(axis=1)
    s = 1.0 / np.sqrt(deg)
    L = np.eye(len(W)) - s[:, None] * W * s[None, :]
    _, vecs = np.linalg.eigh(L)
    Z = vecs[:, 1:d + 1]
    stress = _scaled_stress(pairwise_distances(X), Z)
    return LatentManifold(Z, grid, stress, {"method": "le", "k": k, "dim": d})


def lle_weights(X: np.ndarray, k: int, reg: float = LLE_REG) -> np.ndarray:
    """Row-stochastic reconstruction weights from each point's k nearest neighbors."""
    n = len(X)
    D = pairwise_distances(X)
    np.fill_diagonal(D, np.inf)
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :k]
    W = np.zeros((n, n))
    ones = np.ones(k)
    for i in range(n):
        Z = X[nbrs[i]] - X[i]
        C = Z @ Z.T
        tr = np.trace(C)
        C[np.diag_indices(k)] += reg * tr if tr > 0 else reg
        w = np.linalg.solve(C, ones)
        W[i, nbrs[i]] = w / w.sum()
    return W


def lle(vectors, k: int = DEFAULT_KNN, d: int = 2, grid: SampleGrid | None = None, reg: float = LLE_REG) -> LatentManifold:
    """Locally linear embedding with trace-scaled ridge regularization."""
    X = np.asarray(vectors, dtype=float).reshape(len(vectors), -1)
    if k < d + 1:
        raise ManifoldError(f"LLE needs k >= d + 1, got k={k}, d={d}")
    _require_connected(knn_graph(X, k))
    W = lle_weights(X, k, reg)
    M = np.eye(len(X)) - W
    _, vecs = np.linalg.eigh(M.T @ M)
    Z = vecs[:, 1:d + 1]
    stress = _scaled_stress(pairwise_distances(X), Z)
    return LatentManifold(Z, grid, stress, {"method": "lle", "k": k, "dim": d, "reg": reg})


METHODS = ("mds", "isomap", "le", "lle")


def embed_vectors(vectors, method: str, d: int, seed: int = 0, k: int = DEFAULT_KNN,
                  grid: SampleGrid | None = None, **smacof_kw) -> LatentManifold:
    """Dispatch to one of :data:`METHODS` starting from raw vectors."""
    if method == "mds":
        out = mds_smacof(pairwise_distances(vectors), d, seed=seed, grid=grid, **smacof_kw)
    elif method == "isomap":
        out = isomap(vectors, k, d, seed=seed, grid=grid, **smacof_kw)
    elif method == "le":
        out = laplacian_eigenmaps(vectors, k, d, grid=grid)
    elif method == "lle":
        out = lle(vectors, k, d, grid=grid)
    else:
        raise ManifoldError(f"unknown method {method!r}; choose from {METHODS}")
    return out
