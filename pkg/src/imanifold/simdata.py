"""Synthetic manifolds with known ground truth for benchmarking embeddings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ManifoldError
from .sampling import SampleGrid, sample_so2, sample_t2

# loop separation term added to the third axis of the double saddle
DISTORTION = 0.15
NOISE_SIGMA = 0.01


@dataclass(frozen=True, eq=False)
class ParamPointSet:
    points: np.ndarray
    grid: SampleGrid

    def __post_init__(self):
        if len(self.points) != self.grid.n:
            raise ManifoldError(f"{len(self.points)} points for a grid of {self.grid.n} nodes")

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _saddle_axes(psi, distortion):
    return (
        np.cos(2 * psi),
        np.sin(2 * psi),
        np.cos(4 * psi) + distortion * np.sin(psi),
    )


def double_saddle(n: int = 500, distortion: float = DISTORTION) -> ParamPointSet:
    """Closed curve in R^4 that winds twice around a saddle.

    ``x3`` carries a ``distortion * sin(psi)`` term so that the two windings,
    which share ``(x1, x2)`` at ``psi`` and ``psi + pi``, never touch.
    """
    if n < 8:
        raise ManifoldError(f"double saddle needs n >= 8, got {n}")
    grid = sample_so2(n)
    psi = grid.nodes[:, 2]
    x1, x2, x3 = _saddle_axes(psi, distortion)
    return ParamPointSet(np.column_stack([x1, x2, x3, 0.25 * np.cos(psi)]), grid)


def loop_of_double_saddles(n_phi: int = 40, n_psi: int = 50, distortion: float = DISTORTION) -> ParamPointSet:
    """Torus in R^6: the double saddle swept around its third axis."""
    if n_phi < 8 or n_psi < 8:
        raise ManifoldError(f"loop of double saddles needs counts >= 8, got ({n_phi}, {n_psi})")
    grid = sample_t2(n_phi, n_psi)
    phi, psi = grid.nodes[:, 1], grid.nodes[:, 2]
    x1, x2, x3 = _saddle_axes(psi, distortion)
    c, s = np.cos(phi), np.sin(phi)
    pts = np.column_stack([
        c * x1 - s * x2,
        s * x1 + c * x2,
        x3,
        0.25 * np.cos(psi),
        0.25 * np.cos(phi),
        0.25 * np.sin(phi),
    ])
    return ParamPointSet(pts, grid)


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign-corrected diagonal)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def lift_and_rotate(p: ParamPointSet, target_dim: int = 768, seed: int = 0) -> ParamPointSet:
    """Zero-pad to ``target_dim`` and apply a seeded random orthogonal map."""
    m = p.dim
    if target_dim < m:
        raise DimensionError(f"target_dim {target_dim} is smaller than point dimension {m}")
    padded = np.zeros((len(p.points), target_dim))
    padded[:, :m] = p.points
    q = random_orthogonal(target_dim, np.random.default_rng(seed))
    return ParamPointSet(padded @ q.T, p.grid)


def add_noise(p: ParamPointSet, sigma: float = NOISE_SIGMA, seed: int = 0) -> ParamPointSet:
    if sigma < 0:
        raise ManifoldError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return ParamPointSet(p.points.copy(), p.grid)
    rng = np.random.default_rng(seed)
    return ParamPointSet(p.points + rng.normal(0.0, sigma, size=p.points.shape), p.grid)


SIMULATIONS = {
    "double_saddle": double_saddle,
    "loop_of_double_saddles": loop_of_double_saddles,
}
