"""Proximal operators and the linearized ADMM solver.

Minimizes, over per-covariate transformed coefficient blocks,

    0.5 ||Y - mu - sum_j Utilde_j btilde_j||^2
        + lambda1 sum_j w1_j ||(L_j')^{-1} btilde_j||_1
        + lambda2 sum_j w2_j ||btilde_j||_2

by alternating a linearized group-thresholded block update, an elementwise
soft-thresholded consensus update on z = D btilde, an optional intercept
refresh, and an unscaled dual ascent step. The z iterate carries the exact
sparsity pattern of the solution.
"""

import dataclasses

import numpy as np
from scipy.linalg import solve_triangular

from .design import apply_D, apply_D_inv, split_blocks

__all__ = [
    "SolverConfig",
    "SolverState",
    "SolverSolution",
    "soft_threshold_scalarwise",
    "soft_threshold_group",
    "spectral_radius",
    "init_state",
    "b_update",
    "z_update",
    "dual_update",
    "intercept_update",
    "run_admm",
    "objective_value",
]


@dataclasses.dataclass(frozen=True)
class SolverConfig:
    """Penalty levels and ADMM controls.

    w1 and w2 are per-covariate adaptive weights; None means unit weights.
    varphi is carried along for the design-block construction and is not
    read by the solver itself.
    """

    lambda1: float
    lambda2: float
    varphi: float = 7e-6
    rho: float = 1.0
    eps_tol: float = 1e-4
    max_iter: int = 5000
    nu_factor: float = 5.0
    w1: np.ndarray = None
    w2: np.ndarray = None
    fit_intercept: bool = True
    sweep: str = "gauss-seidel"

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("penalty levels must be nonnegative")
        if self.varphi < 0:
            raise ValueError("varphi must be nonnegative")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.nu_factor <= 0:
            raise ValueError("nu_factor must be positive")
        if self.sweep not in ("gauss-seidel", "jacobi"):
            raise ValueError("sweep must be 'gauss-seidel' or 'jacobi'")
        for w in (self.w1, self.w2):
            if w is not None:
                w = np.asarray(w, dtype=float)
                if not np.all(np.isfinite(w)) or np.any(w < 0):
                    raise ValueError("weights must be finite and nonnegative")

    def weights(self, J):
        """Per-covariate weight vectors, defaulting to ones."""
        w1 = np.ones(J) if self.w1 is None else np.asarray(self.w1, dtype=float)
        w2 = np.ones(J) if self.w2 is None else np.asarray(self.w2, dtype=float)
        if w1.shape != (J,) or w2.shape != (J,):
            raise ValueError("weight vectors must have one entry per covariate")
        return w1, w2


@dataclasses.dataclass
class SolverState:
    """Mutable ADMM iterates plus the running fit residual."""

    b_tilde: np.ndarray
    z: np.ndarray
    u: np.ndarray
    mu_hat: float
    Y: np.ndarray
    residual: np.ndarray
    nu: np.ndarray
    iter: int = 0
    rel_change: float = np.inf
    primal_residual: float = np.inf


@dataclasses.dataclass(frozen=True)
class SolverSolution:
    """Converged (or max_iter) solution in all three coefficient systems."""

    z_star: np.ndarray
    b_tilde_star: np.ndarray
    b_star: list
    mu_hat: float
    iters: int
    converged: bool
    objective: float
    rel_change: float
    primal_residual: float
    u_star: np.ndarray = None
    nu: np.ndarray = None


def soft_threshold_scalarwise(y, tau):
    """Elementwise soft threshold: sgn(y) (|y| - tau)_+."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def soft_threshold_group(y, tau):
    """Group soft threshold: zero if ||y|| <= tau, else shrink the norm by tau."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=float)
    nrm = float(np.linalg.norm(y))
    if nrm <= tau or nrm == 0.0:
        return np.zeros_like(y)
    return y * (1.0 - tau / nrm)


def spectral_radius(M, tol=1e-12, max_iter=10000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    K = M.shape[0]
    # Deterministic start with unequal entries so no eigenvector is missed
    # by symmetry.
    v = np.linspace(1.0, 2.0, K)
    v /= np.linalg.norm(v)
    lam_prev = np.inf
    lam = 0.0
    for _ in range(max_iter):
        w = M @ v
        lam = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(lam - lam_prev) <= tol * max(abs(lam), 1e-30):
            break
        lam_prev = lam
    return lam


def group_slices(blocks):
    """Stacked-vector slice per covariate block."""
    offs = np.cumsum([0] + [blk.n_basis for blk in blocks])
    return [slice(offs[j], offs[j + 1]) for j in range(len(blocks))]


def init_state(blocks, Y, config, nu=None):
    """Zero-start state with per-group linearization constants."""
    Y = np.asarray(Y, dtype=float)
    total = sum(blk.n_basis for blk in blocks)
    if nu is None:
        nu = np.empty(len(blocks))
        for j, blk in enumerate(blocks):
            gram = blk.U_tilde.T @ blk.U_tilde + config.rho * np.eye(blk.n_basis)
            nu[j] = config.nu_factor * spectral_radius(gram)
    mu = float(np.mean(Y)) if config.fit_intercept else 0.0
    return SolverState(
        b_tilde=np.zeros(total),
        z=np.zeros(total),
        u=np.zeros(total),
        mu_hat=mu,
        Y=Y,
        residual=Y - mu,
        nu=nu,
    )


def b_update(l, state, blocks, config, sl=None, w2_l=None):
    """Linearized group update for block l; returns the new block only.

    The gradient of the augmented quadratic at the current iterate is
    -Utilde_l' r + rho L_l^{-1} ((L_l')^{-1} btilde_l - z_l - u_l / rho)
    with r the running full residual, so the stacked formulation never
    has to be materialized. sl and w2_l may be precomputed by the caller.
    """
    if sl is None:
        sl = group_slices(blocks)[l]
    if w2_l is None:
        w2_l = config.weights(len(blocks))[1][l]
    blk = blocks[l]
    b_l = state.b_tilde[sl]
    # Ascent on u adds u'(Db - z) to the Lagrangian, so the quadratic the
    # b-step sees is (rho/2)||Db_l - z_l + u_l/rho||^2.
    w = solve_triangular(blk.L.T, b_l, lower=False) - state.z[sl] + state.u[sl] / config.rho
    grad = -(blk.U_tilde.T @ state.residual) + config.rho * solve_triangular(blk.L, w, lower=True)
    point = b_l - grad / state.nu[l]
    return soft_threshold_group(point, config.lambda2 * w2_l / state.nu[l])


def z_update(state, blocks, config, Db=None, w1=None):
    """Soft-thresholded consensus update with per-covariate thresholds."""
    if Db is None:
        Db = apply_D(blocks, state.b_tilde)
    if w1 is None:
        w1, _ = config.weights(len(blocks))
    v = Db + state.u / config.rho
    tau = np.repeat(
        config.lambda1 * np.asarray(w1) / config.rho,
        [blk.n_basis for blk in blocks],
    )
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def dual_update(state, blocks, rho, Db=None):
    """Unscaled dual ascent on the consensus gap."""
    if Db is None:
        Db = apply_D(blocks, state.b_tilde)
    return state.u + rho * (Db - state.z)


def intercept_update(state, Y, blocks, UL=None):
    """Mean residual after the fit implied by the current z iterate.

    UL may carry the precomputed per-block products U_tilde_j L_j'.
    """
    fitted = np.zeros_like(Y)
    for j, sl in enumerate(group_slices(blocks)):
        if UL is None:
            fitted += blocks[j].U_tilde @ (blocks[j].L.T @ state.z[sl])
        else:
            fitted += UL[j] @ state.z[sl]
    return float(np.mean(Y - fitted))


def objective_value(b_tilde, mu, blocks, Y, config):
    """Penalized loss at a stacked transformed-coefficient vector."""
    w1, w2 = config.weights(len(blocks))
    r = np.asarray(Y, dtype=float) - mu
    val = 0.0
    for j, sl in enumerate(group_slices(blocks)):
        seg = b_tilde[sl]
        r = r - blocks[j].U_tilde @ seg
        back = solve_triangular(blocks[j].L.T, seg, lower=False)
        val += config.lambda1 * w1[j] * float(np.sum(np.abs(back)))
        val += config.lambda2 * w2[j] * float(np.linalg.norm(seg))
    return val + 0.5 * float(r @ r)


def run_admm(blocks, Y, config, init=None):
    """Full ADMM loop; returns a SolverSolution.

    init may carry a previous SolverState for warm starts along a penalty
    ladder. Hitting max_iter returns converged=False rather than raising.
    """
    slices = group_slices(blocks)
    reuse_nu = None
    if init is not None and init.nu is not None and init.nu.shape == (len(blocks),):
        if np.all(init.nu > 0):
            reuse_nu = init.nu
    state = init_state(blocks, Y, config, nu=reuse_nu)
    if init is not None:
        state.b_tilde = init.b_tilde.copy()
        state.z = init.z.copy()
        state.u = init.u.copy()
        state.mu_hat = init.mu_hat if config.fit_intercept else 0.0
        state.residual = state.Y - state.mu_hat
        for j, sl in enumerate(slices):
            state.residual -= blocks[j].U_tilde @ state.b_tilde[sl]

    w1, w2 = config.weights(len(blocks))
    UL = [blk.U_tilde @ blk.L.T for blk in blocks] if config.fit_intercept else None

    converged = False
    for k in range(1, config.max_iter + 1):
        prev = state.b_tilde.copy()
        if config.sweep == "gauss-seidel":
            for l in range(len(blocks)):
                new_block = b_update(l, state, blocks, config, slices[l], w2[l])
                state.residual -= blocks[l].U_tilde @ (new_block - state.b_tilde[slices[l]])
                state.b_tilde[slices[l]] = new_block
        else:  # jacobi: every block sees the same snapshot
            new_blocks = [
                b_update(l, state, blocks, config, slices[l], w2[l])
                for l in range(len(blocks))
            ]
            for l, new_block in enumerate(new_blocks):
                state.residual -= blocks[l].U_tilde @ (new_block - state.b_tilde[slices[l]])
                state.b_tilde[slices[l]] = new_block

        Db = apply_D(blocks, state.b_tilde)
        state.z = z_update(state, blocks, config, Db=Db, w1=w1)
        if config.fit_intercept:
            new_mu = intercept_update(state, state.Y, blocks, UL=UL)
            state.residual += state.mu_hat - new_mu
            state.mu_hat = new_mu
        state.u = dual_update(state, blocks, config.rho, Db=Db)

        state.iter = k
        state.primal_residual = float(np.linalg.norm(Db - state.z))
        denom = max(float(np.linalg.norm(state.b_tilde)), 1.0)
        state.rel_change = float(np.linalg.norm(state.b_tilde - prev)) / denom
        if state.rel_change <= config.eps_tol:
            converged = True
            break

    z_star = state.z.copy()
    b_tilde_star = apply_D_inv(blocks, z_star)
    b_star = [seg / blk.delta_n for seg, blk in zip(split_blocks(z_star, blocks), blocks)]
    obj = objective_value(b_tilde_star, state.mu_hat, blocks, state.Y, config)
    return SolverSolution(
        z_star=z_star,
        b_tilde_star=b_tilde_star,
        b_star=b_star,
        mu_hat=state.mu_hat,
        iters=state.iter,
        converged=converged,
        objective=obj,
        rel_change=state.rel_change,
        primal_residual=state.primal_residual,
        u_star=state.u.copy(),
        nu=state.nu.copy(),
    )
