import numpy as np
import pytest

from faddos import model as fm
from faddos import simbench as sb
from faddos import solver as fs
from faddos import tuning as ft
from faddos.basis import basis_matrix, make_grid


def test_true_beta_values():
    assert sb.true_beta(1, 1.0 / 6.0) == pytest.approx(2.0)
    assert sb.true_beta(1, 0.5) == 0.0
    assert sb.true_beta(1, 5.0 / 6.0) == pytest.approx(-2.0)
    assert sb.true_beta(2, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert sb.true_beta(2, 1.0) == pytest.approx(1.5)
    for j in range(3, 11):
        assert sb.true_beta(j, 0.42) == 0.0


def test_true_beta_continuity_at_breakpoints():
    for t0 in (1.0 / 3.0, 2.0 / 3.0):
        below = sb.true_beta(1, t0 - 1e-9)
        above = sb.true_beta(1, t0 + 1e-9)
        assert abs(below - above) < 1e-7


def test_true_beta_shapes_and_errors():
    t = np.linspace(0.0, 1.0, 7)
    out = sb.true_beta(2, t)
    assert out.shape == (7,)
    assert isinstance(sb.true_beta(2, 0.3), float)
    with pytest.raises(ValueError):
        sb.true_beta(0, 0.5)
    with pytest.raises(ValueError):
        sb.true_beta(11, 0.5)
    with pytest.raises(ValueError):
        sb.true_beta(1, -0.1)
    with pytest.raises(ValueError):
        sb.true_beta(1, np.array([0.2, 1.2]))


def test_spec_validation():
    with pytest.raises(ValueError):
        sb.SimulationSpec(n_train=0, n_test=10)
    with pytest.raises(ValueError):
        sb.SimulationSpec(n_train=10, n_test=10, noise_sd=-1.0)
    with pytest.raises(ValueError):
        sb.SimulationSpec(n_train=10, n_test=10, grid_points=1)


def test_simulate_deterministic():
    spec = sb.SimulationSpec(n_train=12, n_test=8, seed=5)
    tr_a, te_a = sb.simulate_dataset(spec, replicate=3)
    tr_b, te_b = sb.simulate_dataset(spec, replicate=3)
    for Xa, Xb in zip(tr_a.X + te_a.X, tr_b.X + te_b.X):
        assert Xa.tobytes() == Xb.tobytes()
    assert tr_a.Y.tobytes() == tr_b.Y.tobytes()
    assert te_a.Y.tobytes() == te_b.Y.tobytes()
    tr_c, _ = sb.simulate_dataset(spec, replicate=4)
    assert tr_a.Y.tobytes() != tr_c.Y.tobytes()


def test_simulate_shapes():
    spec = sb.SimulationSpec(n_train=9, n_test=4, grid_points=33)
    train, test = sb.simulate_dataset(spec)
    assert len(train.X) == 10 and len(test.X) == 10
    assert train.X[0].shape == (9, 33)
    assert test.X[9].shape == (4, 33)
    assert train.Y.shape == (9,)
    np.testing.assert_allclose(train.grid.points, np.linspace(0.0, 1.0, 33))


def test_response_zero_when_coefficients_zero(monkeypatch):
    monkeypatch.setattr(
        sb, "true_beta", lambda j, t: np.zeros_like(np.asarray(t, dtype=float))
    )
    spec = sb.SimulationSpec(n_train=15, n_test=5, noise_sd=0.0, test_noise_sd=0.0)
    train, test = sb.simulate_dataset(spec)
    np.testing.assert_array_equal(train.Y, np.zeros(15))
    np.testing.assert_array_equal(test.Y, np.zeros(5))


def test_noise_variance_matches_model():
    # Same (seed, replicate) share the X stream, so the Y difference is the
    # pure noise draw.
    noisy = sb.SimulationSpec(n_train=1000, n_test=2, seed=10, noise_sd=1.0)
    clean = sb.SimulationSpec(n_train=1000, n_test=2, seed=10, noise_sd=0.0)
    tr_n, _ = sb.simulate_dataset(noisy)
    tr_c, _ = sb.simulate_dataset(clean)
    eps = tr_n.Y - tr_c.Y
    assert abs(np.var(eps) - 1.0) < 0.15
    assert abs(np.mean(eps)) < 0.1


def test_ise_exact_sampler_is_zero():
    sampler = lambda pts: sb.true_beta(1, pts)
    assert sb.ise(sampler, 1) == 0.0
    assert sb.ise(sampler, 1, region="N0") == 0.0
    assert sb.ise(sampler, 1, region="N1") == 0.0


def test_ise_zero_sampler_known_values():
    zero = lambda pts: np.zeros_like(pts)
    # integral of (2 sin(3 pi t))^2 over each outer third is 2/3
    assert sb.ise(zero, 1) == pytest.approx(4.0 / 3.0, abs=2e-3)
    assert sb.ise(zero, 1, region="N0") < 1e-25
    assert sb.ise(zero, 1, region="N1") == pytest.approx(2.0, abs=5e-3)


def test_ise_region_errors():
    zero = lambda pts: np.zeros_like(pts)
    with pytest.raises(ValueError):
        sb.ise(zero, 2, region="N0")
    with pytest.raises(ValueError):
        sb.ise(zero, 1, region="middle")


def test_ise_grid_refinement_stable():
    zero = lambda pts: np.zeros_like(pts)
    coarse = sb.ise(zero, 2, n_points=2000)
    fine = sb.ise(zero, 2, n_points=20000)
    assert abs(coarse - fine) / fine < 5e-3


def test_tnr_examples():
    nulls = set(range(3, 11))
    assert sb.tnr({1, 2}, nulls) == 1.0
    assert sb.tnr({1, 2, 3, 4}, nulls) == 0.75
    assert sb.tnr(nulls, nulls) == 0.0
    with pytest.raises(ValueError):
        sb.tnr({1}, set())


def _manual_result(basis, b_star, mu=0.0):
    return fm.FitResult(
        b_star=b_star,
        mu_hat=mu,
        selected=tuple(j for j, b in enumerate(b_star) if np.any(b != 0.0)),
        zero_regions={},
        weights_used=None,
        config_used=None,
        diagnostics=None,
        basis=basis,
    )


def test_pmse_degenerate_cases():
    spec = sb.SimulationSpec(n_train=5, n_test=40, seed=2, test_noise_sd=1.0)
    _, test = sb.simulate_dataset(spec)
    basis = sb.estimation_basis(M_n=10)
    K = basis.n_basis
    zeros = [np.zeros(K) for _ in range(10)]
    const = _manual_result(basis, zeros, mu=float(np.mean(test.Y)))
    assert sb.pmse(const, test) == pytest.approx(float(np.var(test.Y)), rel=1e-12)


def test_pmse_oracle_projection_near_noise_floor():
    spec = sb.SimulationSpec(n_train=5, n_test=1000, seed=4, test_noise_sd=1.0)
    _, test = sb.simulate_dataset(spec)
    basis = sb.estimation_basis()
    pts = make_grid(0.0, 1.0, 3000).points
    B = basis_matrix(basis, pts)
    b_star = [
        np.linalg.lstsq(B, sb.true_beta(j, pts), rcond=None)[0] for j in range(1, 11)
    ]
    oracle = _manual_result(basis, b_star)
    val = sb.pmse(oracle, test)
    assert 0.85 < val < 1.15


def _cheap_fit(seed=0, lambda1=50.0, lambda2=5.0):
    spec = sb.SimulationSpec(n_train=40, n_test=25, seed=seed)
    train, test = sb.simulate_dataset(spec)
    basis = sb.estimation_basis(M_n=8)
    config = fs.SolverConfig(lambda1=lambda1, lambda2=lambda2, varphi=7e-6)
    return fm.fit(train, basis, config, mode="faddos"), test


def test_evaluate_fit_row_contents():
    result, test = _cheap_fit()
    row = sb.evaluate_fit(result, test, replicate=3, method="faddos")
    assert row["replicate"] == 3 and row["method"] == "faddos"
    assert row["pmse"] > 0.0
    assert 0.0 <= row["tnr"] <= 1.0
    for j in range(1, 11):
        assert f"ise_{j}" in row and isinstance(row[f"selected_{j}"], bool)
    assert row["sum_ise_nulls"] == pytest.approx(
        sum(row[f"ise_{j}"] for j in range(3, 11))
    )
    assert 0.0 <= row["zero_coverage_1"] <= 1.0
    assert row["lambda1"] == 50.0 and row["lambda2"] == 5.0
    # an excluded covariate has an exactly-zero curve, so its ISE is the
    # squared norm of the true coefficient (zero for the null ones)
    for j in range(3, 11):
        if not row[f"selected_{j}"]:
            assert row[f"ise_{j}"] == 0.0


def _stub_row(method, pmse_val, tnr_val, selected_nulls):
    row = {
        "method": method,
        "pmse": pmse_val,
        "tnr": tnr_val,
        "sum_ise_nulls": 0.1,
        "ise0_1": 0.01,
        "ise1_1": 0.02,
        "ise_2": 0.03,
        "zero_coverage_1": 0.9,
    }
    for j in range(3, 11):
        row[f"selected_{j}"] = j in selected_nulls
    return row


def test_aggregate_rows_synthetic():
    rows = (
        _stub_row("m", 1.0, 1.0, set()),
        _stub_row("m", 3.0, 0.75, {3, 4}),
        _stub_row("other", 7.0, 0.5, {3, 4, 5, 6}),
    )
    agg = sb.aggregate_rows(rows)
    assert list(agg.keys()) == ["m", "other"]
    m = agg["m"]
    assert m.n_replicates == 2
    assert m.mean_pmse == pytest.approx(2.0)
    assert m.sd_pmse == pytest.approx(np.sqrt(2.0))
    assert m.avg_tnr == pytest.approx(0.875)
    # exclusion rates across nulls: 0.5 twice (j=3,4), 1.0 six times
    assert m.sd_tnr == pytest.approx(np.sqrt(0.375 / 7.0))
    assert agg["other"].n_replicates == 1
    assert agg["other"].sd_pmse == 0.0
    assert agg["other"].avg_tnr == 0.5


def test_aggregate_single_rep_sd_zero():
    rows = (_stub_row("m", 2.5, 1.0, set()),)
    agg = sb.aggregate_rows(rows)
    assert agg["m"].sd_pmse == 0.0
    assert agg["m"].sd_sum_ise_nulls == 0.0
    assert agg["m"].sd_tnr == 0.0  # every null excluded in the one rep


def test_run_path_study_small():
    spec = sb.SimulationSpec(n_train=50, n_test=5, seed=7)
    basis = sb.estimation_basis(M_n=8)
    table = sb.run_path_study(
        spec,
        lambda1_values=(1.0, 1e6),
        lambda2_values=(1.0,),
        varphi=7e-6,
        basis=basis,
        weights_mode="unit",
    )
    assert set(table.keys()) == {(1.0, 1.0), (1e6, 1.0)}
    # an absurdly large lambda1 zeroes every block
    assert table[(1e6, 1.0)]["sum_ise_nulls"] == 0.0
    assert table[(1e6, 1.0)]["ise0_1"] < 1e-25
    for cell in table.values():
        assert cell["sum_ise_nulls"] >= 0.0 and cell["ise0_1"] >= 0.0


def test_run_benchmark_single_cell():
    spec = sb.SimulationSpec(n_train=40, n_test=25, seed=3)
    grid = ft.TuningGrid((50.0,), (5.0,), (7e-6,), k_folds=3, seed=1)
    basis = sb.estimation_basis(M_n=8)
    report = sb.run_benchmark(spec, methods=("faddos",), grid=grid, basis=basis)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row["method"] == "faddos"
    assert row["lambda1"] == 50.0
    assert "faddos" in report.aggregates
    assert report.aggregates["faddos"].n_replicates == 1
