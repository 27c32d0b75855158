"""End-to-end fitting: initial estimate, adaptive weights, solve, report.

The adaptive path fits a roughness-penalized least-squares estimate first,
turns its per-covariate norms into penalty weights, and hands those to the
ADMM solver. The plain path uses unit weights. Everything downstream of the
solver (selection, zero subregions, prediction) reads the exact-zero pattern
of the returned coefficients.
"""

import dataclasses

import numpy as np

from .basis import (
    _check_grid_covers,
    basis_matrix,
    eval_basis,
    integrate,
    quadrature_weights,
    roughness_matrix,
)
from .design import JITTER_LADDER, build_block, compute_U
from .solver import SolverConfig, run_admm

RIDGE_GCV_GRID = tuple(np.logspace(-8.0, 2.0, 10))
WEIGHT_FLOOR = 1e-8


@dataclasses.dataclass(frozen=True)
class InitialEstimate:
    """Non-sparse pilot fit used to calibrate the adaptive weights."""

    b_check: list
    mu_check: float
    basis: object
    norms_l1: np.ndarray
    norms_l2: np.ndarray
    ridge_lambda: float

    def beta_check(self, j, t):
        """Pilot coefficient function for covariate j at scalar t."""
        return float(eval_basis(self.basis, t) @ self.b_check[j])


@dataclasses.dataclass(frozen=True)
class FitDiagnostics:
    iterations: int
    converged: bool
    objective: float


@dataclasses.dataclass(frozen=True)
class FitResult:
    """Fitted model; coefficient blocks carry exact zeros from the solver."""

    b_star: list
    mu_hat: float
    selected: tuple
    zero_regions: dict
    weights_used: tuple
    config_used: SolverConfig
    diagnostics: FitDiagnostics
    basis: object


def _solve_penalized(Z, P, Y, lam):
    """Solve (Z'Z + 2 lam P) c = Z'Y, escalating jitter on singularity."""
    A = Z.T @ Z + 2.0 * lam * P
    rhs = Z.T @ Y
    scale = np.trace(A) / A.shape[0]
    for eps in (0.0,) + JITTER_LADDER:
        try:
            coef = np.linalg.solve(A + eps * scale * np.eye(A.shape[0]), rhs)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(coef)):
            return coef
    raise np.linalg.LinAlgError(
        "penalized normal equations are singular even with maximum jitter"
    )


def _ridge_design_from_U(U_list, Omega):
    n = U_list[0].shape[0]
    Z = np.hstack([np.ones((n, 1))] + list(U_list))
    K = Omega.shape[0]
    J = len(U_list)
    P = np.zeros((1 + J * K, 1 + J * K))
    for j in range(J):
        off = 1 + j * K
        P[off : off + K, off : off + K] = Omega
    return Z, P


def select_ridge_lambda_from_U(U_list, Omega, Y, grid=RIDGE_GCV_GRID):
    """Generalized cross-validation over a log-spaced ridge grid."""
    Z, P = _ridge_design_from_U(U_list, Omega)
    n = Y.shape[0]
    best_lam, best_score = None, np.inf
    for lam in grid:
        A = Z.T @ Z + 2.0 * float(lam) * P
        scale = np.trace(A) / A.shape[0]
        coef = None
        for eps in (0.0,) + JITTER_LADDER:
            try:
                solved = np.linalg.solve(
                    A + eps * scale * np.eye(A.shape[0]),
                    np.hstack([(Z.T @ Y)[:, None], Z.T]),
                )
            except np.linalg.LinAlgError:
                continue
            if np.all(np.isfinite(solved)):
                coef = solved
                break
        if coef is None:
            continue
        fitted = Z @ coef[:, 0]
        df = float(np.einsum("ij,ji->", Z, coef[:, 1:]))
        denom = max(n - df, 1e-8)
        score = n * float(np.sum((Y - fitted) ** 2)) / denom**2
        if score < best_score:
            best_lam, best_score = float(lam), score
    if best_lam is None:
        raise np.linalg.LinAlgError("ridge screening failed on the whole grid")
    return best_lam


def select_ridge_lambda(data, basis, grid=RIDGE_GCV_GRID):
    U_list = [compute_U(Xj, basis, data.grid) for Xj in data.X]
    Omega = roughness_matrix(basis, data.grid)
    return select_ridge_lambda_from_U(U_list, Omega, data.Y, grid)


def initial_estimator_from_U(U_list, Omega, Y, basis, eval_grid, ridge_lambda):
    """Roughness-penalized least squares in one linear solve."""
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be positive")
    Z, P = _ridge_design_from_U(U_list, Omega)
    coef = _solve_penalized(Z, P, Y, float(ridge_lambda))
    K = basis.n_basis
    J = len(U_list)
    b_check = [coef[1 + j * K : 1 + (j + 1) * K] for j in range(J)]
    B = basis_matrix(basis, eval_grid.points)
    norms_l1 = np.empty(J)
    norms_l2 = np.empty(J)
    for j, b in enumerate(b_check):
        vals = B @ b
        norms_l1[j] = integrate(np.abs(vals), eval_grid)
        norms_l2[j] = np.sqrt(integrate(vals * vals, eval_grid))
    return InitialEstimate(
        b_check=b_check,
        mu_check=float(coef[0]),
        basis=basis,
        norms_l1=norms_l1,
        norms_l2=norms_l2,
        ridge_lambda=float(ridge_lambda),
    )


def initial_estimator(data, basis, ridge_lambda):
    U_list = [compute_U(Xj, basis, data.grid) for Xj in data.X]
    Omega = roughness_matrix(basis, data.grid)
    return initial_estimator_from_U(
        U_list, Omega, data.Y, basis, data.grid, ridge_lambda
    )


def adaptive_weights(init, a=1.0, floor=WEIGHT_FLOOR):
    """Inverse-norm penalty weights with a floor on the norms."""
    if a <= 0:
        raise ValueError("a must be positive")
    if floor <= 0:
        raise ValueError("floor must be positive")
    w1 = np.maximum(init.norms_l1, floor) ** (-a)
    w2 = np.maximum(init.norms_l2, floor) ** (-a)
    return w1, w2


def compute_weights_from_U(
    U_list, Omega, Y, basis, eval_grid, mode, ridge_lambda=None, a=1.0
):
    """Penalty weights for the requested mode; unit weights for 'fdos'."""
    J = len(U_list)
    if mode == "fdos":
        return np.ones(J), np.ones(J)
    if mode != "faddos":
        raise ValueError("mode must be 'fdos' or 'faddos'")
    if ridge_lambda is None:
        ridge_lambda = select_ridge_lambda_from_U(U_list, Omega, Y)
    init = initial_estimator_from_U(U_list, Omega, Y, basis, eval_grid, ridge_lambda)
    return adaptive_weights(init, a=a)


def compute_weights(data, basis, mode, ridge_lambda=None, a=1.0):
    if mode == "fdos":
        return np.ones(data.J), np.ones(data.J)
    U_list = [compute_U(Xj, basis, data.grid) for Xj in data.X]
    Omega = roughness_matrix(basis, data.grid)
    return compute_weights_from_U(
        U_list, Omega, data.Y, basis, data.grid, mode, ridge_lambda, a=a
    )


def fit(data, basis, config, mode="faddos", blocks=None, weights=None, init=None):
    """Fit one model; blocks/weights/init may be supplied to reuse work."""
    if weights is None:
        w1, w2 = compute_weights(data, basis, mode)
    else:
        w1, w2 = weights
    config = dataclasses.replace(config, w1=np.asarray(w1), w2=np.asarray(w2))
    if blocks is None:
        blocks = [build_block(Xj, basis, data.grid, config.varphi) for Xj in data.X]
    sol = run_admm(blocks, data.Y, config, init=init)
    selected = tuple(j for j, b in enumerate(sol.b_star) if np.any(b != 0.0))
    zero_regions = {j: _zero_intervals(basis, sol.b_star[j]) for j in selected}
    return FitResult(
        b_star=sol.b_star,
        mu_hat=sol.mu_hat,
        selected=selected,
        zero_regions=zero_regions,
        weights_used=(w1, w2),
        config_used=config,
        diagnostics=FitDiagnostics(sol.iters, sol.converged, sol.objective),
        basis=basis,
    )


def _zero_intervals(basis, b):
    """Knot subintervals where every supported coefficient is exactly zero."""
    bounds = np.linspace(basis.domain_start, basis.domain_end, basis.M_n + 1)
    zero = b == 0.0
    flags = [bool(np.all(zero[r : r + basis.d + 1])) for r in range(basis.M_n)]
    intervals = []
    r = 0
    while r < basis.M_n:
        if flags[r]:
            start = r
            while r < basis.M_n and flags[r]:
                r += 1
            intervals.append((float(bounds[start]), float(bounds[r])))
        else:
            r += 1
    return intervals


def zero_subregions(result, j):
    """Zero intervals for covariate j; the whole domain if j was dropped."""
    if j not in result.selected:
        return [(result.basis.domain_start, result.basis.domain_end)]
    return result.zero_regions[j]


def reconstruct_coefficient(result, j, t):
    """Fitted coefficient function for covariate j at t (scalar or array)."""
    b = result.b_star[j]
    if np.isscalar(t):
        return float(eval_basis(result.basis, float(t)) @ b)
    pts = np.asarray(t, dtype=float)
    return basis_matrix(result.basis, pts.ravel()) @ b


def predict(result, new_data):
    """Intercept plus integrated covariate-by-coefficient products."""
    _check_grid_covers(result.basis, new_data.grid)
    yhat = np.full(new_data.n, result.mu_hat)
    w = quadrature_weights(new_data.grid)
    B = basis_matrix(result.basis, new_data.grid.points)
    for j in range(new_data.J):
        beta_vals = B @ result.b_star[j]
        yhat += (new_data.X[j] * w) @ beta_vals
    return yhat
