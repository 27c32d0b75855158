"""Synthetic benchmark: ten functional covariates, two active, eight null.

Covariates are random B-spline combinations (order 4, 50 equally spaced
knots). The response integrates each covariate against an exact-formula
coefficient function on a fine grid that is independent of any estimation
basis, then adds unit-variance noise. Metrics follow the usual reporting:
integrated squared error (whole domain and the known zero/nonzero split of
the first coefficient), true negative rate over the null covariates, and
prediction mean squared error on held-out subjects.
"""

import dataclasses

import numpy as np

from .basis import basis_matrix, integrate, make_basis, make_grid, quadrature_weights
from .design import FunctionalDataset
from .model import compute_weights, fit, predict, reconstruct_coefficient, zero_subregions
from .tuning import cross_validate, select_best

DOMAIN = (0.0, 1.0)
GEN_M_N = 49  # 50 equally spaced knots -> 49 subintervals
GEN_DEGREE = 3  # order 4
N_COVARIATES = 10
NULL_COVARIATES = tuple(range(3, 11))  # 1-based labels of the zero coefficients
SIGNAL_GRID_POINTS = 2000
EST_M_N = 40
EST_DEGREE = 3


@dataclasses.dataclass(frozen=True)
class SimulationSpec:
    n_train: int
    n_test: int
    n_replicates: int = 1
    seed: int = 0
    noise_sd: float = 1.0
    test_noise_sd: float = 0.0
    grid_points: int = 201

    def __post_init__(self):
        if min(self.n_train, self.n_test, self.n_replicates) <= 0:
            raise ValueError("sample sizes and replicate count must be positive")
        if self.noise_sd < 0 or self.test_noise_sd < 0:
            raise ValueError("noise levels must be nonnegative")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")


def true_beta(j, t):
    """Exact coefficient function for covariate j (labels 1..10)."""
    if j < 1 or j > N_COVARIATES:
        raise ValueError(f"covariate label must be in 1..{N_COVARIATES}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0.0) or np.any(t_arr > 1.0):
        raise ValueError("t must lie in [0, 1]")
    if j == 1:
        out = np.where(
            t_arr <= 1.0 / 3.0,
            2.0 * np.sin(3.0 * np.pi * t_arr),
            np.where(t_arr >= 2.0 / 3.0, -2.0 * np.sin(3.0 * np.pi * t_arr), 0.0),
        )
    elif j == 2:
        out = 1.5 * t_arr**2 + 2.0 * np.sin(3.0 * np.pi * t_arr)
    else:
        out = np.zeros_like(t_arr)
    return float(out) if np.isscalar(t) else out


def _draw_block(rng, n, B_obs, B_fine, fine_grid):
    """One covariate: observed curves plus its per-subject signal integrals."""
    coefs = rng.normal(size=(n, B_obs.shape[1]))
    return coefs @ B_obs.T, coefs @ B_fine.T


def simulate_dataset(spec, replicate=0):
    """One (train, test) pair; deterministic in (spec.seed, replicate)."""
    rng = np.random.default_rng([spec.seed, replicate])
    gen_basis = make_basis(DOMAIN, M_n=GEN_M_N, d=GEN_DEGREE)
    obs_grid = make_grid(*DOMAIN, spec.grid_points)
    fine_grid = make_grid(*DOMAIN, SIGNAL_GRID_POINTS)
    B_obs = basis_matrix(gen_basis, obs_grid.points)
    B_fine = basis_matrix(gen_basis, fine_grid.points)
    beta_fine = [true_beta(j, fine_grid.points) for j in range(1, N_COVARIATES + 1)]

    def draw(n, noise_sd):
        X, signal = [], np.zeros(n)
        for j in range(N_COVARIATES):
            X_obs, X_fine = _draw_block(rng, n, B_obs, B_fine, fine_grid)
            X.append(X_obs)
            signal += integrate(X_fine * beta_fine[j], fine_grid)
        Y = signal + noise_sd * rng.normal(size=n)
        return FunctionalDataset(X=X, Y=Y, grid=obs_grid)

    train = draw(spec.n_train, spec.noise_sd)
    test = draw(spec.n_test, spec.test_noise_sd)
    return train, test


def _region_grids(j, region, n_points):
    if region == "all":
        return [make_grid(*DOMAIN, n_points)], 1.0
    if j != 1:
        raise ValueError("zero/nonzero subregions are defined for covariate 1 only")
    third = 1.0 / 3.0
    if region == "N0":
        return [make_grid(third, 2 * third, n_points)], third
    if region == "N1":
        half = max(n_points // 2, 2)
        return [make_grid(0.0, third, half), make_grid(2 * third, 1.0, half)], 2 * third
    raise ValueError("region must be 'all', 'N0' or 'N1'")


def ise(sampler, j, region="all", n_points=SIGNAL_GRID_POINTS):
    """Mean squared discrepancy from the true coefficient over a region."""
    grids, normalizer = _region_grids(j, region, n_points)
    total = 0.0
    for grid in grids:
        diff = np.asarray(sampler(grid.points)) - true_beta(j, grid.points)
        total += integrate(diff * diff, grid)
    return total / normalizer


def tnr(selected, true_nulls):
    """Fraction of the truly null labels that were excluded."""
    true_nulls = set(true_nulls)
    if not true_nulls:
        raise ValueError("true_nulls must be non-empty")
    return len(true_nulls - set(selected)) / len(true_nulls)


def pmse(result, test_data):
    """Mean squared prediction error on a held-out dataset."""
    resid = test_data.Y - predict(result, test_data)
    return float(np.mean(resid * resid))


def _fit_sampler(result, j):
    """Coefficient sampler for 1-based covariate label j."""
    return lambda pts: reconstruct_coefficient(result, j - 1, pts)


def _zero_coverage(result, j):
    """Fraction of the true middle-third zero region covered by reported zeros."""
    lo, hi = 1.0 / 3.0, 2.0 / 3.0
    covered = 0.0
    for t_a, t_b in zero_subregions(result, j - 1):
        covered += max(0.0, min(t_b, hi) - max(t_a, lo))
    return covered / (hi - lo)


def evaluate_fit(result, test_data, replicate, method):
    """One benchmark row: prediction, selection, and ISE metrics."""
    row = {
        "replicate": replicate,
        "method": method,
        "pmse": pmse(result, test_data),
        "converged": result.diagnostics.converged,
        "lambda1": result.config_used.lambda1,
        "lambda2": result.config_used.lambda2,
        "varphi": result.config_used.varphi,
    }
    selected_labels = {j + 1 for j in result.selected}
    row["tnr"] = tnr(selected_labels, NULL_COVARIATES)
    for j in range(1, N_COVARIATES + 1):
        row[f"ise_{j}"] = ise(_fit_sampler(result, j), j)
        row[f"selected_{j}"] = j in selected_labels
    row["ise0_1"] = ise(_fit_sampler(result, 1), 1, region="N0")
    row["ise1_1"] = ise(_fit_sampler(result, 1), 1, region="N1")
    row["zero_coverage_1"] = _zero_coverage(result, 1)
    row["sum_ise_nulls"] = sum(row[f"ise_{j}"] for j in NULL_COVARIATES)
    return row


@dataclasses.dataclass(frozen=True)
class MethodAggregate:
    method: str
    n_replicates: int
    mean_pmse: float
    sd_pmse: float
    avg_tnr: float
    sd_tnr: float
    mean_sum_ise_nulls: float
    sd_sum_ise_nulls: float
    mean_ise0_1: float
    mean_ise1_1: float
    mean_ise_2: float
    mean_zero_coverage_1: float


@dataclasses.dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple
    aggregates: dict
    curves: tuple = ()


def _sd(values):
    values = np.asarray(values, dtype=float)
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def aggregate_rows(rows):
    """Per-method summary; TNR spread is taken across the null covariates."""
    methods = []
    for row in rows:
        if row["method"] not in methods:
            methods.append(row["method"])
    out = {}
    for method in methods:
        sub = [r for r in rows if r["method"] == method]
        exclusion_rates = [
            np.mean([0.0 if r[f"selected_{j}"] else 1.0 for r in sub])
            for j in NULL_COVARIATES
        ]
        out[method] = MethodAggregate(
            method=method,
            n_replicates=len(sub),
            mean_pmse=float(np.mean([r["pmse"] for r in sub])),
            sd_pmse=_sd([r["pmse"] for r in sub]),
            avg_tnr=float(np.mean([r["tnr"] for r in sub])),
            sd_tnr=_sd(exclusion_rates),
            mean_sum_ise_nulls=float(np.mean([r["sum_ise_nulls"] for r in sub])),
            sd_sum_ise_nulls=_sd([r["sum_ise_nulls"] for r in sub]),
            mean_ise0_1=float(np.mean([r["ise0_1"] for r in sub])),
            mean_ise1_1=float(np.mean([r["ise1_1"] for r in sub])),
            mean_ise_2=float(np.mean([r["ise_2"] for r in sub])),
            mean_zero_coverage_1=float(np.mean([r["zero_coverage_1"] for r in sub])),
        )
    return out


def estimation_basis(M_n=EST_M_N, d=EST_DEGREE):
    return make_basis(DOMAIN, M_n=M_n, d=d)


def run_benchmark(spec, methods=("fdos", "faddos"), grid=None, basis=None, curve_points=0):
    """CV-tuned fits for every (replicate, method); returns rows + aggregates.

    With ``curve_points > 0`` the fitted and true coefficient functions are
    also sampled on that many equally spaced points, one record per
    (method, replicate, covariate, t).
    """
    if grid is None:
        from .tuning import default_grid

        grid = default_grid(seed=spec.seed)
    if basis is None:
        basis = estimation_basis()
    rows, curves = [], []
    pts = make_grid(*DOMAIN, curve_points).points if curve_points else None
    for rep in range(spec.n_replicates):
        train, test = simulate_dataset(spec, rep)
        for method in methods:
            cv = cross_validate(train, basis, grid, mode=method)
            config = select_best(cv)
            result = fit(train, basis, config, mode=method)
            rows.append(evaluate_fit(result, test, rep, method))
            if pts is not None:
                B = basis_matrix(basis, pts)
                for j in range(1, N_COVARIATES + 1):
                    fitted = B @ result.b_star[j - 1]
                    truth = true_beta(j, pts)
                    curves.extend(
                        {
                            "method": method,
                            "replicate": rep,
                            "covariate": j,
                            "t": t,
                            "beta_hat": bh,
                            "beta_true": bt,
                        }
                        for t, bh, bt in zip(pts, fitted, truth)
                    )
    rows = tuple(rows)
    return BenchmarkReport(
        rows=rows, aggregates=aggregate_rows(rows), curves=tuple(curves)
    )


def run_path_study(
    spec, lambda1_values, lambda2_values, varphi, basis=None, weights_mode="adaptive"
):
    """Fixed-weight fits over a small (lambda1, lambda2) table, averaged.

    Weights are computed once per replicate from the full training split
    (or forced to 1), so the table isolates the effect of the two penalty
    levels. Returns {(lambda1, lambda2): {"sum_ise_nulls": m, "ise0_1": m}}.
    """
    from .design import build_block
    from .solver import SolverConfig, run_admm
    from .tuning import _solution_state

    if basis is None:
        basis = estimation_basis()
    sums = {
        (l1, l2): {"sum_ise_nulls": [], "ise0_1": []}
        for l1 in lambda1_values
        for l2 in lambda2_values
    }
    for rep in range(spec.n_replicates):
        train, _ = simulate_dataset(spec, rep)
        mode = "faddos" if weights_mode == "adaptive" else "fdos"
        w1, w2 = compute_weights(train, basis, mode)
        blocks = [build_block(Xj, basis, train.grid, varphi) for Xj in train.X]
        for l2 in lambda2_values:
            warm = None
            for l1 in sorted(lambda1_values):
                config = SolverConfig(
                    lambda1=l1, lambda2=l2, varphi=varphi, w1=w1, w2=w2
                )
                sol = run_admm(blocks, train.Y, config, init=warm)
                warm = _solution_state(sol, blocks, train.Y, config)
                samplers = {
                    j: (lambda pts, b=sol.b_star[j - 1]: basis_matrix(basis, pts) @ b)
                    for j in range(1, N_COVARIATES + 1)
                }
                cell = sums[(l1, l2)]
                cell["sum_ise_nulls"].append(
                    sum(ise(samplers[j], j) for j in NULL_COVARIATES)
                )
                cell["ise0_1"].append(ise(samplers[1], 1, region="N0"))
    return {
        key: {name: float(np.mean(vals)) for name, vals in cell.items()}
        for key, cell in sums.items()
    }
