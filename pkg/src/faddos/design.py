"""Per-covariate design structures for the reparameterized objective.

For each functional covariate this assembles the quadrature design U, the
Gram and roughness matrices, the combined penalty matrix with its Cholesky
factor, and the transformed design used by the solver. Also provides the
block-diagonal back-substitution map that links the transformed and the
sparse coefficient vectors.
"""

import dataclasses

import numpy as np
from scipy.linalg import solve_triangular

from . import basis as fb

__all__ = [
    "FunctionalDataset",
    "DesignBlock",
    "compute_U",
    "build_block",
    "build_block_from_U",
    "assemble_D",
    "apply_D",
    "apply_D_inv",
    "subset_rows",
    "stack_blocks",
    "split_blocks",
    "safe_cholesky",
]

# Relative jitter ladder tried when the penalty matrix is numerically
# borderline; each step adds eps * trace/K to the diagonal.
JITTER_LADDER = (1e-12, 1e-10, 1e-8)


@dataclasses.dataclass(frozen=True)
class FunctionalDataset:
    """n subjects by J functional covariates on a shared uniform grid.

    X is a list of J arrays of shape (n, R) holding signal values at the
    grid points; Y is the length-n response vector.
    """

    X: list
    Y: np.ndarray
    grid: fb.EvalGrid

    def __post_init__(self):
        if len(self.X) == 0:
            raise ValueError("dataset needs at least one covariate")
        n = self.X[0].shape[0]
        for j, Xj in enumerate(self.X):
            if Xj.ndim != 2 or Xj.shape[0] != n:
                raise ValueError(f"covariate {j + 1} has inconsistent subject count")
            if Xj.shape[1] != self.grid.n_points:
                raise ValueError(f"covariate {j + 1} does not match the grid length")
            if not np.all(np.isfinite(Xj)):
                raise ValueError(f"covariate {j + 1} contains non-finite values")
        if self.Y.shape != (n,):
            raise ValueError("response length does not match the subject count")

    @property
    def n(self):
        return self.X[0].shape[0]

    @property
    def J(self):
        return len(self.X)


@dataclasses.dataclass(frozen=True)
class DesignBlock:
    """Design matrices of one covariate under a fixed smoothing weight.

    K_mat = (Phi + varphi * Omega) / delta_n^2 with Cholesky factor L, and
    U_tilde = U (L')^{-1} / delta_n computed by triangular back-substitution.
    """

    U: np.ndarray
    Phi: np.ndarray
    Omega: np.ndarray
    K_mat: np.ndarray
    L: np.ndarray
    U_tilde: np.ndarray
    delta_n: float
    varphi: float
    jitter_used: float

    @property
    def n_basis(self):
        return self.L.shape[0]


def compute_U(X_j, basis, grid):
    """Quadrature design: row i holds the integrals of X_ij against each basis function."""
    X_j = np.asarray(X_j, dtype=float)
    if X_j.ndim != 2 or X_j.shape[1] != grid.n_points:
        raise ValueError("signal matrix shape does not match the grid")
    B = fb.basis_matrix(basis, grid.points)
    w = fb.quadrature_weights(grid)
    return (X_j * w) @ B


def safe_cholesky(M):
    """Lower Cholesky factor with a relative jitter ladder fallback.

    Returns (L, jitter_used). Raises np.linalg.LinAlgError with the smallest
    eigenvalue in the message if every ladder step fails.
    """
    M = np.asarray(M, dtype=float)
    scale = np.trace(M) / M.shape[0]
    for eps in (0.0,) + tuple(JITTER_LADDER):
        try:
            L = np.linalg.cholesky(M + eps * scale * np.eye(M.shape[0]))
            return L, eps * scale
        except np.linalg.LinAlgError:
            continue
    smallest = np.linalg.eigvalsh(M)[0]
    raise np.linalg.LinAlgError(
        f"penalty matrix not positive definite (smallest eigenvalue {smallest:.3e})"
    )


def build_block_from_U(U, basis, grid, varphi):
    """Assemble a DesignBlock from a precomputed quadrature design."""
    if varphi < 0:
        raise ValueError("varphi must be nonnegative")
    phi = fb.gram_matrix(basis, grid)
    omega = fb.roughness_matrix(basis, grid)
    dn = basis.delta_n
    K_mat = (phi + varphi * omega) / (dn * dn)
    L, jitter = safe_cholesky(K_mat)
    # U (L')^{-1} via back-substitution on L W = U', never a matrix inverse.
    U_tilde = solve_triangular(L, U.T, lower=True).T / dn
    return DesignBlock(
        U=U,
        Phi=phi,
        Omega=omega,
        K_mat=K_mat,
        L=L,
        U_tilde=U_tilde,
        delta_n=dn,
        varphi=float(varphi),
        jitter_used=jitter,
    )


def build_block(X_j, basis, grid, varphi):
    """Design block for one covariate: quadrature design plus penalty transform."""
    return build_block_from_U(compute_U(X_j, basis, grid), basis, grid, varphi)


def subset_rows(block, rows):
    """Block restricted to a subset of subjects; penalty matrices are shared."""
    return dataclasses.replace(block, U=block.U[rows], U_tilde=block.U_tilde[rows])


def stack_blocks(vectors):
    """Concatenate per-covariate coefficient blocks into one vector."""
    return np.concatenate([np.asarray(v, dtype=float) for v in vectors])


def split_blocks(vector, blocks):
    """Split a stacked coefficient vector back into per-covariate blocks."""
    sizes = [blk.n_basis for blk in blocks]
    offs = np.cumsum([0] + sizes)
    if vector.shape[0] != offs[-1]:
        raise ValueError("stacked vector length does not match the blocks")
    return [vector[offs[j] : offs[j + 1]] for j in range(len(blocks))]


def apply_D(blocks, stacked):
    """Back-substitution map: per block (L')^{-1} applied to the stacked vector."""
    out = np.empty_like(stacked)
    off = 0
    for blk in blocks:
        K = blk.n_basis
        out[off : off + K] = solve_triangular(blk.L.T, stacked[off : off + K], lower=False)
        off += K
    return out


def apply_D_inv(blocks, stacked):
    """Inverse of the back-substitution map: per block multiply by L'."""
    out = np.empty_like(stacked)
    off = 0
    for blk in blocks:
        K = blk.n_basis
        out[off : off + K] = blk.L.T @ stacked[off : off + K]
        off += K
    return out


def assemble_D(blocks):
    """Dense block-diagonal matrix of the per-covariate (L')^{-1} factors."""
    sizes = [blk.n_basis for blk in blocks]
    if len(set(sizes)) > 1:
        raise ValueError("all blocks must share the same basis size")
    varphis = {blk.varphi for blk in blocks}
    if len(varphis) > 1:
        raise ValueError("all blocks must share a single varphi")
    total = sum(sizes)
    D = np.zeros((total, total))
    off = 0
    for blk in blocks:
        K = blk.n_basis
        D[off : off + K, off : off + K] = solve_triangular(blk.L.T, np.eye(K), lower=False)
        off += K
    return D
