import numpy as np
import pytest

from faddos import basis as fb
from faddos import design as fd
from faddos import model as fm
from faddos import simbench as sb
from faddos import solver as fs
from faddos import tuning as ft


def _small_problem(seed=0, n=60):
    spec = sb.SimulationSpec(n_train=n, n_test=40, seed=seed)
    train, test = sb.simulate_dataset(spec, 0)
    basis = sb.estimation_basis(M_n=15)
    return train, test, basis


def test_kfold_balanced_sizes():
    folds = ft.kfold_split(10, 5, seed=1)
    assert [f.size for f in folds] == [2, 2, 2, 2, 2]
    folds = ft.kfold_split(7, 5, seed=1)
    assert sorted(f.size for f in folds) == [1, 1, 1, 2, 2]


def test_kfold_partition_and_determinism():
    folds_a = ft.kfold_split(23, 4, seed=7)
    folds_b = ft.kfold_split(23, 4, seed=7)
    for fa, fb_ in zip(folds_a, folds_b):
        np.testing.assert_array_equal(fa, fb_)
    merged = np.concatenate(folds_a)
    assert merged.size == 23
    np.testing.assert_array_equal(np.sort(merged), np.arange(23))
    folds_c = ft.kfold_split(23, 4, seed=8)
    assert any(not np.array_equal(a, c) for a, c in zip(folds_a, folds_c))


def test_kfold_bad_k():
    with pytest.raises(ValueError):
        ft.kfold_split(10, 1, seed=0)
    with pytest.raises(ValueError):
        ft.kfold_split(10, 11, seed=0)


def test_tuning_grid_validation():
    with pytest.raises(ValueError):
        ft.TuningGrid((), (1.0,), (1e-6,))
    with pytest.raises(ValueError):
        ft.TuningGrid((1.0,), (-1.0,), (1e-6,))
    with pytest.raises(ValueError):
        ft.TuningGrid((1.0,), (1.0,), (1e-6,), k_folds=1)
    grid = ft.default_grid(seed=3)
    assert grid.k_folds == 5
    assert len(grid.lambda1_values) == 7
    assert len(grid.lambda2_values) == 7
    assert grid.varphi_values == (3e-6, 7e-6, 5e-5, 2e-4)


def test_single_cell_matches_manual_average():
    train, _, basis = _small_problem(seed=1)
    grid = ft.TuningGrid((5.0,), (2.0,), (1e-5,), k_folds=4, seed=11)
    cv = ft.cross_validate(train, basis, grid, mode="fdos")
    assert len(cv.cells) == 1

    folds = ft.kfold_split(train.n, 4, seed=11)
    pmses = []
    for test_idx in folds:
        tr = np.setdiff1d(np.arange(train.n), test_idx)
        sub = fd.FunctionalDataset(
            X=[Xj[tr] for Xj in train.X], Y=train.Y[tr], grid=train.grid
        )
        config = fs.SolverConfig(lambda1=5.0, lambda2=2.0, varphi=1e-5)
        res = fm.fit(sub, basis, config, mode="fdos")
        held = fd.FunctionalDataset(
            X=[Xj[test_idx] for Xj in train.X], Y=train.Y[test_idx], grid=train.grid
        )
        pmses.append(np.mean((held.Y - fm.predict(res, held)) ** 2))
    assert cv.cells[0].mean_pmse == pytest.approx(np.mean(pmses), rel=1e-8)
    assert cv.cells[0].sd_pmse == pytest.approx(np.std(pmses, ddof=1), rel=1e-6)


def test_dominated_cell_does_not_change_best():
    train, _, basis = _small_problem(seed=2)
    lean = ft.TuningGrid((1.0, 20.0), (2.0,), (1e-5,), k_folds=3, seed=5)
    cv_lean = ft.cross_validate(train, basis, lean, mode="fdos")
    best_lean = cv_lean.cells[cv_lean.best]

    padded = ft.TuningGrid((1.0, 20.0, 1e7), (2.0,), (1e-5,), k_folds=3, seed=5)
    cv_pad = ft.cross_validate(train, basis, padded, mode="fdos")
    best_pad = cv_pad.cells[cv_pad.best]
    worst = max(cv_pad.cells, key=lambda c: c.mean_pmse)
    if worst.lambda1 == 1e7:  # genuinely dominated, argmin must be stable
        assert (best_pad.lambda1, best_pad.lambda2) == (
            best_lean.lambda1,
            best_lean.lambda2,
        )


def test_select_best_tie_breaks():
    def cell(l1, l2, ph, pmse):
        return ft.CVCell(l1, l2, ph, pmse, 0.0, 1.0)

    cells = (cell(1.0, 3.0, 1e-6, 0.5), cell(2.0, 3.0, 1e-6, 0.5))
    cv = ft.CVResult(cells=cells, best=ft._best_index(cells))
    cfg = ft.select_best(cv)
    assert cfg.lambda1 == 2.0

    cells = (cell(2.0, 3.0, 1e-6, 0.5), cell(2.0, 3.0, 5e-5, 0.5))
    cv = ft.CVResult(cells=cells, best=ft._best_index(cells))
    assert ft.select_best(cv).varphi == 5e-5

    cells = (cell(1.0, 1.0, 1e-6, 0.2), cell(9.0, 9.0, 1e-6, 0.4))
    cv = ft.CVResult(cells=cells, best=ft._best_index(cells))
    cfg = ft.select_best(cv)
    assert (cfg.lambda1, cfg.lambda2) == (1.0, 1.0)

    with pytest.raises(ValueError):
        ft.select_best(ft.CVResult(cells=(), best=0))


def test_cross_validate_deterministic():
    train, _, basis = _small_problem(seed=3)
    grid = ft.TuningGrid((1.0, 10.0), (1.0,), (1e-5,), k_folds=3, seed=2)
    a = ft.cross_validate(train, basis, grid, mode="faddos")
    b = ft.cross_validate(train, basis, grid, mode="faddos")
    assert a == b


def test_no_leakage_from_held_out_fold():
    train, _, basis = _small_problem(seed=4)
    folds = ft.kfold_split(train.n, 4, seed=9)
    U = [fd.compute_U(Xj, basis, train.grid) for Xj in train.X]
    Omega = fb.roughness_matrix(basis, train.grid)
    base = ft.training_weights(U, Omega, train.Y, basis, train.grid, folds, "faddos")

    Y2 = train.Y.copy()
    Y2[folds[0]] += 100.0
    poked = ft.training_weights(U, Omega, Y2, basis, train.grid, folds, "faddos")

    # Fold 0 trains without its own rows, so its weights cannot move.
    np.testing.assert_array_equal(base[0][0], poked[0][0])
    np.testing.assert_array_equal(base[0][1], poked[0][1])
    # Other folds do train on the perturbed rows.
    assert any(
        not np.array_equal(base[f][0], poked[f][0]) for f in range(1, len(folds))
    )


def test_all_cells_nonconvergent_raises():
    train, _, basis = _small_problem(seed=5)
    grid = ft.TuningGrid((0.01,), (0.01,), (1e-5,), k_folds=3, seed=1)
    with pytest.raises(RuntimeError, match="no CV cell converged"):
        ft.cross_validate(
            train,
            basis,
            grid,
            mode="fdos",
            solver_options={"max_iter": 1, "eps_tol": 1e-15},
        )


def test_selected_cell_close_to_test_optimum():
    spec = sb.SimulationSpec(n_train=100, n_test=1000, seed=21)
    train, test = sb.simulate_dataset(spec, 0)
    basis = sb.estimation_basis(M_n=20)
    grid = ft.TuningGrid((10.0, 100.0, 1000.0), (1.0, 5.0), (7e-6,), k_folds=5, seed=0)
    cv = ft.cross_validate(train, basis, grid, mode="faddos")
    chosen = ft.select_best(cv)

    w = fm.compute_weights(train, basis, "faddos")
    test_pmse = {}
    for cell in cv.cells:
        config = fs.SolverConfig(
            lambda1=cell.lambda1, lambda2=cell.lambda2, varphi=cell.varphi
        )
        res = fm.fit(train, basis, config, mode="faddos", weights=w)
        test_pmse[(cell.lambda1, cell.lambda2, cell.varphi)] = sb.pmse(res, test)
    best_direct = min(test_pmse.values())
    got = test_pmse[(chosen.lambda1, chosen.lambda2, chosen.varphi)]
    assert got <= 1.15 * best_direct
