"""Cross-validated selection of the two penalty levels and the curvature mix.

The fold layout, the per-fold weights, and every design quantity that can be
shared are computed once: U depends only on the data and basis, the Cholesky
transform only on the curvature mix, so blocks are built per varphi on the
full data and row-sliced per fold. Fits along the lambda1 ladder warm-start
from their predecessor within each (lambda2, varphi, fold) slice.
"""

import dataclasses

import numpy as np

from .basis import roughness_matrix
from .design import build_block_from_U, compute_U, subset_rows
from .model import compute_weights_from_U
from .solver import SolverConfig, SolverState, init_state, run_admm

DEFAULT_LAMBDA1 = tuple(np.logspace(-1.0, 4.0, 7))
DEFAULT_LAMBDA2 = tuple(np.logspace(-2.0, 2.0, 7))
DEFAULT_VARPHI = (3e-6, 7e-6, 5e-5, 2e-4)
TIE_EPS = 1e-12


@dataclasses.dataclass(frozen=True)
class TuningGrid:
    lambda1_values: tuple
    lambda2_values: tuple
    varphi_values: tuple
    k_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("lambda1_values", "lambda2_values", "varphi_values"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            if any(v < 0 for v in vals):
                raise ValueError(f"{name} must be nonnegative")
            object.__setattr__(self, name, vals)
        if self.k_folds < 2:
            raise ValueError("k_folds must be at least 2")


def default_grid(seed=0, k_folds=5):
    return TuningGrid(DEFAULT_LAMBDA1, DEFAULT_LAMBDA2, DEFAULT_VARPHI, k_folds, seed)


@dataclasses.dataclass(frozen=True)
class CVCell:
    lambda1: float
    lambda2: float
    varphi: float
    mean_pmse: float
    sd_pmse: float
    convergence_rate: float


@dataclasses.dataclass(frozen=True)
class CVResult:
    cells: tuple
    best: int


def kfold_split(n, k, seed):
    """Deterministic shuffled folds with sizes differing by at most one."""
    if k < 2 or k > n:
        raise ValueError("k must satisfy 2 <= k <= n")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(fold) for fold in np.array_split(perm, k)]


def training_weights(U_list, Omega, Y, basis, eval_grid, folds, mode):
    """Per-fold penalty weights computed from the training rows only."""
    out = []
    n = Y.shape[0]
    for test_idx in folds:
        train = np.setdiff1d(np.arange(n), test_idx)
        U_train = [U[train] for U in U_list]
        out.append(
            compute_weights_from_U(U_train, Omega, Y[train], basis, eval_grid, mode)
        )
    return out


def _best_index(cells):
    best = None
    for i, cell in enumerate(cells):
        if best is None:
            best = i
            continue
        lead = cells[best]
        if cell.mean_pmse < lead.mean_pmse - TIE_EPS:
            best = i
        elif abs(cell.mean_pmse - lead.mean_pmse) <= TIE_EPS:
            key = (cell.lambda1 + cell.lambda2, cell.varphi)
            lead_key = (lead.lambda1 + lead.lambda2, lead.varphi)
            if key > lead_key:
                best = i
    return best


def cross_validate(data, basis, grid, mode="faddos", solver_options=None):
    """Average held-out squared error for every (lambda1, lambda2, varphi) cell."""
    n = data.n
    solver_options = dict(solver_options or {})
    folds = kfold_split(n, grid.k_folds, grid.seed)
    U_full = [compute_U(Xj, basis, data.grid) for Xj in data.X]
    Omega = roughness_matrix(basis, data.grid)
    fold_weights = training_weights(
        U_full, Omega, data.Y, basis, data.grid, folds, mode
    )
    lam1_ladder = sorted(grid.lambda1_values)

    # errors[(l1, l2, phi)] -> list over folds of (pmse, converged)
    per_cell = {
        (l1, l2, ph): []
        for ph in grid.varphi_values
        for l2 in grid.lambda2_values
        for l1 in grid.lambda1_values
    }
    for varphi in grid.varphi_values:
        blocks_full = [build_block_from_U(U, basis, data.grid, varphi) for U in U_full]
        for f, test_idx in enumerate(folds):
            train = np.setdiff1d(np.arange(n), test_idx)
            blocks_train = [subset_rows(blk, train) for blk in blocks_full]
            U_test = [U[test_idx] for U in U_full]
            Y_train, Y_test = data.Y[train], data.Y[test_idx]
            w1, w2 = fold_weights[f]
            for lam2 in grid.lambda2_values:
                warm = None
                for lam1 in lam1_ladder:
                    config = SolverConfig(
                        lambda1=lam1,
                        lambda2=lam2,
                        varphi=varphi,
                        w1=w1,
                        w2=w2,
                        **solver_options,
                    )
                    sol = run_admm(blocks_train, Y_train, config, init=warm)
                    warm = _solution_state(sol, blocks_train, Y_train, config)
                    yhat = np.full(test_idx.size, sol.mu_hat)
                    for U, b in zip(U_test, sol.b_star):
                        yhat += U @ b
                    pmse = float(np.mean((Y_test - yhat) ** 2))
                    per_cell[(lam1, lam2, varphi)].append((pmse, sol.converged))

    cells = []
    for varphi in grid.varphi_values:
        for lam2 in grid.lambda2_values:
            for lam1 in grid.lambda1_values:
                rows = per_cell[(lam1, lam2, varphi)]
                pmses = np.array([r[0] for r in rows])
                conv = np.mean([1.0 if r[1] else 0.0 for r in rows])
                cells.append(
                    CVCell(
                        lambda1=float(lam1),
                        lambda2=float(lam2),
                        varphi=float(varphi),
                        mean_pmse=float(np.mean(pmses)),
                        sd_pmse=float(np.std(pmses, ddof=1)) if len(pmses) > 1 else 0.0,
                        convergence_rate=float(conv),
                    )
                )
    if all(cell.convergence_rate == 0.0 for cell in cells):
        worst = ", ".join(
            f"(l1={c.lambda1:g}, l2={c.lambda2:g}, varphi={c.varphi:g})"
            for c in cells[:5]
        )
        raise RuntimeError(f"no CV cell converged in any fold; first cells: {worst}")
    cells = tuple(cells)
    return CVResult(cells=cells, best=_best_index(cells))


def _solution_state(sol, blocks, Y, config):
    """Repackage a solution as a start state for the next ladder step.

    Only the iterates and the cached linearization constants are read by
    run_admm; the residual is rebuilt there.
    """
    Y = np.asarray(Y, dtype=float)
    return SolverState(
        b_tilde=sol.b_tilde_star.copy(),
        z=sol.z_star.copy(),
        u=sol.u_star.copy(),
        mu_hat=sol.mu_hat,
        Y=Y,
        residual=np.zeros_like(Y),
        nu=sol.nu,
    )


def select_best(cv):
    """Winning cell as a ready-to-use solver configuration."""
    if not cv.cells:
        raise ValueError("empty cross-validation result")
    cell = cv.cells[cv.best]
    return SolverConfig(lambda1=cell.lambda1, lambda2=cell.lambda2, varphi=cell.varphi)
