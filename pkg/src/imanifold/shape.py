"""Kendall-style shape comparison of latent manifolds.

Two manifolds sampled on the same grid are compared after removing
translation, global scale, orthogonal transformations of the latent space and
rigid re-indexings of the grid (cyclic shifts and orientation flips).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .embed import LatentManifold, mds_smacof
from .errors import (
    DegenerateManifoldError,
    GridMismatchError,
    ManifoldError,
    ShapeMismatchError,
    UnsupportedRegistrationError,
)
from .sampling import Registration, SampleGrid, registration_permutations

# bytes of workspace used per batch when scanning registrations
_BATCH_BYTES = 1 << 26


def _points(m) -> np.ndarray:
    pts = m.points if isinstance(m, LatentManifold) else m
    return np.asarray(pts, dtype=float)


def standardize(m) -> np.ndarray:
    """Center the points and scale them so that ``sum |z_i|^2 = n``."""
    Z = _points(m)
    Z = Z - Z.mean(axis=0)
    ss = float(np.sum(Z ** 2))
    if ss <= 0.0:
        raise DegenerateManifoldError("all points coincide; the shape is undefined")
    return Z * np.sqrt(len(Z) / ss)


def pad_dims(A: np.ndarray, B: np.ndarray):
    """Zero-pad the lower-dimensional point set so both have equal width."""
    d = max(A.shape[1], B.shape[1])
    if A.shape[1] < d:
        A = np.hstack([A, np.zeros((len(A), d - A.shape[1]))])
    if B.shape[1] < d:
        B = np.hstack([B, np.zeros((len(B), d - B.shape[1]))])
    return A, B


def procrustes(A, B):
    """Orthogonal ``Q`` minimizing ``sum_i |Q a_i - b_i|^2`` and the attained RMSE.

    Reflections are allowed (``Q`` ranges over the full orthogonal group).
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ShapeMismatchError(f"point sets differ in shape: {A.shape} vs {B.shape}")
    U, _, Vt = np.linalg.svd(A.T @ B)
    Q = Vt.T @ U.T
    return Q, rmse(A @ Q.T, B)


def rmse(A, B) -> float:
    return float(np.sqrt(np.mean(np.sum((A - B) ** 2, axis=1))))


@dataclass(eq=False)
class ShapeResult:
    distance: float
    registration: Registration
    alignment: np.ndarray

    def to_dict(self) -> dict:
        return {
            "distance": self.distance,
            "shifts": [int(s) for s in self.registration.shifts],
            "direction_class": int(self.registration.direction_class),
            "permutation": [int(i) for i in self.registration.permutation],
            "Q": [float(x) for x in self.alignment.ravel()],
            "dim": int(self.alignment.shape[0]),
        }


def _family(grid: SampleGrid | None, n: int, family):
    """Resolve ``family`` into ``(perms, classes, shifts)``."""
    if isinstance(family, str) and family == "identity" or (family is None and grid is None):
        return np.arange(n)[None, :], np.zeros(1, dtype=int), [()]
    if family is None or (isinstance(family, str) and family == "restricted"):
        try:
            return registration_permutations(grid)
        except UnsupportedRegistrationError:
            return np.arange(n)[None, :], np.zeros(1, dtype=int), [()]
    perms = np.atleast_2d(np.asarray(family, dtype=np.int64))
    if perms.shape[1] != n:
        raise ShapeMismatchError(f"registrations act on {perms.shape[1]} points, manifolds have {n}")
    return perms, np.zeros(len(perms), dtype=int), [(i,) for i in range(len(perms))]


def _check_grids(m1, m2):
    g1 = m1.grid if isinstance(m1, LatentManifold) else None
    g2 = m2.grid if isinstance(m2, LatentManifold) else None
    if g1 is not None and g2 is not None and not g1.compatible_with(g2):
        raise GridMismatchError(f"cannot compare a {g1.topology}({g1.n}) grid with {g2.topology}({g2.n})")
    return g1 if g1 is not None else g2


def nuclear_scores(A: np.ndarray, B: np.ndarray, perms: np.ndarray) -> np.ndarray:
    """Nuclear norm of ``A[perm].T @ B`` for every row of ``perms``."""
    n, d = A.shape
    batch = max(1, _BATCH_BYTES // (8 * n * d))
    out = np.empty(len(perms))
    for s in range(0, len(perms), batch):
        Ap = A[perms[s:s + batch]]
        C = np.einsum("pni,nj->pij", Ap, B)
        out[s:s + batch] = np.linalg.svd(C, compute_uv=False).sum(axis=1)
    return out


def shape_distance(m1, m2, family=None) -> ShapeResult:
    """Minimum RMSE between standardized ``m1`` and ``m2`` over registrations and O(d).

    ``family`` selects the registrations applied to ``m1``: ``None`` or
    ``"restricted"`` uses all shifts and flips of the shared grid (identity
    only on grids without a registration family), ``"identity"`` disables
    registration, and an ``(r, n)`` integer array supplies explicit
    permutations.  Ties go to the lowest registration index.
    """
    grid = _check_grids(m1, m2)
    A, B = standardize(m1), standardize(m2)
    if len(A) != len(B):
        raise GridMismatchError(f"manifolds have {len(A)} and {len(B)} points")
    A, B = pad_dims(A, B)
    perms, classes, shifts = _family(grid, len(A), family)
    # |Q a - b|^2 summed = |A|^2 + |B|^2 - 2 * nuclear(A_s^T B); rank by the nuclear norm,
    # then recompute the winner directly to avoid cancellation near zero
    best = int(np.argmax(nuclear_scores(A, B, perms)))
    Q, dist = procrustes(A[perms[best]], B)
    reg = Registration(perms[best].copy(), int(classes[best]), tuple(shifts[best]))
    return ShapeResult(dist, reg, Q)


def registration_rmse(m1, m2, permutation) -> float:
    """RMSE of one registration with its optimal Procrustes alignment."""
    A, B = pad_dims(standardize(m1), standardize(m2))
    return procrustes(A[np.asarray(permutation)], B)[1]


def min_cost_assignment(cost) -> np.ndarray:
    """``col[i]`` assigned to row ``i`` minimizing total cost."""
    rows, cols = linear_sum_assignment(np.asarray(cost, dtype=float))
    out = np.empty(len(rows), dtype=np.int64)
    out[rows] = cols
    return out


@dataclass(eq=False)
class FreeAlignResult:
    assignment: np.ndarray
    rmse: float
    alignment: np.ndarray


# sign patterns enumerated for principal-axis starts are capped at 2**_MAX_SIGN_AXES
_MAX_SIGN_AXES = 10


def _sq_dists(B: np.ndarray, A: np.ndarray) -> np.ndarray:
    cost = np.sum(B ** 2, axis=1)[:, None] + np.sum(A ** 2, axis=1)[None, :] - 2.0 * B @ A.T
    return np.maximum(cost, 0.0)


def _principal_starts(A: np.ndarray, B: np.ndarray):
    """Orthogonal maps sending the principal axes of ``A`` onto those of ``B``, all sign choices."""
    _, _, Va = np.linalg.svd(A, full_matrices=False)
    _, _, Vb = np.linalg.svd(B, full_matrices=False)
    d = A.shape[1]
    m = min(d, _MAX_SIGN_AXES)
    for bits in range(2 ** m):
        signs = np.ones(d)
        signs[:m] = [-1.0 if bits >> j & 1 else 1.0 for j in range(m)]
        yield (Vb.T * signs) @ Va


def free_align(m1, m2, init: str = "principal", refits: int = 1) -> FreeAlignResult:
    """Unrestricted point matching for visualization.

    An initial orthogonal map is chosen, points are matched by a minimum-cost
    assignment on squared distances and the alignment is refit; assignment and
    refit alternate ``refits`` times.  ``assignment[i]`` is the index of the
    point of ``m1`` matched with point ``i`` of ``m2``.

    With ``init="identity"`` the start is the Procrustes fit under the identity
    registration.  ``init="principal"`` also considers every sign pattern of
    the principal-axis correspondence and keeps whichever candidate has the
    smallest nearest-neighbour RMSE, which avoids locking onto the index
    pairing when the two curves wind a different number of times.
    """
    if init not in ("identity", "principal"):
        raise ManifoldError(f"unknown init {init!r}")
    if refits < 1:
        raise ManifoldError(f"refits must be >= 1, got {refits}")
    A, B = standardize(m1), standardize(m2)
    if A.shape[0] != B.shape[0]:
        raise ShapeMismatchError(f"point counts differ: {len(A)} vs {len(B)}")
    A, B = pad_dims(A, B)
    Q, _ = procrustes(A, B)
    if init == "principal":
        best = np.mean(_sq_dists(B, A @ Q.T).min(axis=1))
        for cand in _principal_starts(A, B):
            score = np.mean(_sq_dists(B, A @ cand.T).min(axis=1))
            if score < best:
                best, Q = score, cand
    for _ in range(refits):
        sigma = min_cost_assignment(_sq_dists(B, A @ Q.T))
        Q, err = procrustes(A[sigma], B)
    return FreeAlignResult(sigma, err, Q)


def shape_distance_matrix(manifolds, family=None, both_orders: bool = False) -> np.ndarray:
    """Pairwise shape distances.

    With the default restricted families (which are closed under inversion)
    the distance is symmetric, so only ``i < j`` is computed and mirrored;
    ``both_orders`` evaluates every ordered pair as computed.
    """
    n = len(manifolds)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = shape_distance(manifolds[i], manifolds[j], family).distance
            out[j, i] = (shape_distance(manifolds[j], manifolds[i], family).distance
                         if both_orders else out[i, j])
    return out


def proximity_embed_2d(D, seed: int = 0, **kw) -> np.ndarray:
    """Planar positions reproducing a shape-distance matrix (MDS at d = 2)."""
    return mds_smacof(D, 2, seed=seed, **kw).points


def cluster(D, k: int) -> np.ndarray:
    """Average-linkage agglomerative clustering cut at ``k`` clusters.

    Ties between equally close cluster pairs go to the pair with the lowest
    indices.  Labels are numbered by first appearance.
    """
    D = np.asarray(D, dtype=float)
    n = len(D)
    if not 1 <= k <= n:
        raise ManifoldError(f"need 1 <= k <= {n}, got {k}")
    clusters = [[i] for i in range(n)]
    while len(clusters) > k:
        best, pair = np.inf, None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                dist = D[np.ix_(clusters[a], clusters[b])].mean()
                if dist < best:
                    best, pair = dist, (a, b)
        a, b = pair
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    # clusters stay ordered by their smallest member, so position is first appearance
    labels = np.empty(n, dtype=int)
    for ci, c in enumerate(clusters):
        labels[c] = ci
    return labels
