"""Command-line surface: simulate, fit, cv, predict, benchmark.

Heavy imports happen inside the handlers so the FADDOS_NUM_THREADS
override can take effect before the numeric libraries spin up their
thread pools.
"""

import argparse
import os
import sys

CURVE_POINTS = 201

FIT_DEFAULTS = {
    "mode": "faddos",
    "lambda1": None,
    "lambda2": None,
    "varphi": 7e-6,
    "knots": 20,
    "degree": 3,
    "rho": 1.0,
    "eps_tol": 1e-4,
    "max_iter": 5000,
    "a": 1.0,
    "pad": False,
    "resample": None,
    "differentiate": False,
    "fft": None,
    "fft_window": "hann",
}

CV_EXTRA_DEFAULTS = {"folds": 5, "seed": 0}


def _apply_thread_override():
    value = os.environ.get("FADDOS_NUM_THREADS")
    if value is None:
        return
    try:
        count = int(value)
        if count < 1:
            raise ValueError
    except ValueError:
        raise ValueError(
            f"FADDOS_NUM_THREADS must be a positive integer, got {value!r}"
        ) from None
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(count)


def _float_list(value):
    try:
        if isinstance(value, (list, tuple)):
            values = [float(v) for v in value]
        else:
            values = [float(v) for v in str(value).split(",") if v.strip() != ""]
    except (TypeError, ValueError):
        raise ValueError(f"expected comma-separated numbers, got {value!r}") from None
    if not values:
        raise ValueError(f"expected at least one number, got {value!r}")
    return values


def _parse_fft(text):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ValueError(
            f"--fft expects SAMPLE_RATE:F_MAX (e.g. 30:15), got {text!r}"
        )
    return float(parts[0]), float(parts[1])


def _gather_options(args, defaults):
    """defaults <- config file <- explicit flags, with key validation."""
    from . import storage

    options = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        loaded = storage.read_config(config_path)
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ValueError(
                f"{config_path}: unknown config keys {unknown}; "
                f"allowed: {sorted(defaults)}"
            )
        options.update(loaded)
    for key in defaults:
        flag = getattr(args, key, None)
        if flag is not None:
            options[key] = flag
    if options["mode"] not in ("fdos", "faddos"):
        raise ValueError(f"mode must be 'fdos' or 'faddos', got {options['mode']!r}")
    return options


def _load_and_preprocess(signals_path, response_path, options):
    """Load long CSVs and apply pad -> resample -> differentiate -> fft."""
    from . import preprocess, storage
    from .basis import EvalGrid, make_grid
    from .design import FunctionalDataset

    loaded = storage.load_long_csv(
        signals_path, response_path, pad=bool(options["pad"])
    )
    data = loaded.dataset
    meta = {}
    if options["pad"]:
        meta["pad"] = True
    if options["resample"]:
        n_points = int(options["resample"])
        target = make_grid(data.grid.points[0], data.grid.points[-1], n_points)
        X = [
            preprocess.resample_linear(Xj, data.grid.points, target.points)
            for Xj in data.X
        ]
        data = FunctionalDataset(X=X, Y=data.Y, grid=target)
        meta["resample"] = n_points
    if options["differentiate"]:
        X = [preprocess.differentiate(Xj, data.grid.points) for Xj in data.X]
        data = FunctionalDataset(X=X, Y=data.Y, grid=data.grid)
        meta["differentiate"] = True
    if options["fft"]:
        rate, f_max = _parse_fft(options["fft"])
        window = options["fft_window"]
        X, freqs = [], None
        for Xj in data.X:
            spectrum = preprocess.fft_magnitude(Xj, rate, f_max, window=window)
            X.append(spectrum.magnitudes)
            freqs = spectrum.frequencies
        if freqs.size < 2:
            raise ValueError("f_max keeps fewer than two frequency bins")
        grid = EvalGrid(points=freqs, spacing=float(freqs[1] - freqs[0]))
        data = FunctionalDataset(X=X, Y=data.Y, grid=grid)
        meta["fft"] = f"{rate}:{f_max}"
        meta["fft_window"] = window
    return data, loaded, meta


def _basis_for(data, options):
    from .basis import make_basis

    domain = (float(data.grid.points[0]), float(data.grid.points[-1]))
    return make_basis(domain, M_n=int(options["knots"]), d=int(options["degree"]))


def _write_coefficient_csv(path, result, covariate_ids):
    from . import storage
    from .basis import basis_matrix, make_grid

    pts = make_grid(
        result.basis.domain_start, result.basis.domain_end, CURVE_POINTS
    ).points
    B = basis_matrix(result.basis, pts)
    rows = []
    for j, cov in enumerate(covariate_ids):
        curve = B @ result.b_star[j]
        rows.extend([cov, t, v] for t, v in zip(pts, curve))
    storage.write_csv(path, ["covariate_id", "t", "beta_hat"], rows)


def cmd_simulate(args):
    from . import simbench, storage

    spec = simbench.SimulationSpec(
        n_train=args.n,
        n_test=args.n_test,
        seed=args.seed,
        noise_sd=args.noise_sd,
        test_noise_sd=args.test_noise_sd,
        grid_points=args.grid_points,
    )
    train, test = simbench.simulate_dataset(spec, replicate=args.replicate)
    os.makedirs(args.out, exist_ok=True)
    covariates = [f"X{j}" for j in range(1, simbench.N_COVARIATES + 1)]
    for name, data in (("train", train), ("test", test)):
        subjects = [f"{name}{i + 1:04d}" for i in range(data.n)]
        storage.write_long_csv(
            os.path.join(args.out, f"{name}_signals.csv"), data, subjects, covariates
        )
        storage.write_response_csv(
            os.path.join(args.out, f"{name}_response.csv"), data.Y, subjects
        )
    print(
        f"simulate: wrote {train.n} training and {test.n} test subjects "
        f"({simbench.N_COVARIATES} covariates, {train.grid.n_points} grid points) "
        f"to {args.out}"
    )
    return 0


def cmd_fit(args):
    from . import model, storage
    from .solver import SolverConfig

    options = _gather_options(args, FIT_DEFAULTS)
    if options["lambda1"] is None or options["lambda2"] is None:
        raise ValueError(
            "lambda1 and lambda2 are required: pass --lambda1/--lambda2 or a "
            "--config written by the cv command"
        )
    data, loaded, meta = _load_and_preprocess(args.signals, args.response, options)
    basis = _basis_for(data, options)
    weights = model.compute_weights(data, basis, options["mode"], a=options["a"])
    config = SolverConfig(
        lambda1=float(options["lambda1"]),
        lambda2=float(options["lambda2"]),
        varphi=float(options["varphi"]),
        rho=float(options["rho"]),
        eps_tol=float(options["eps_tol"]),
        max_iter=int(options["max_iter"]),
    )
    result = model.fit(data, basis, config, mode=options["mode"], weights=weights)
    fitted = model.predict(result, data)

    os.makedirs(args.out, exist_ok=True)
    result_path = os.path.join(args.out, "result.json")
    storage.write_document(
        result_path,
        storage.result_to_document(
            result, mode=options["mode"], fitted_values=fitted, metadata=meta
        ),
    )
    coef_path = os.path.join(args.out, "coefficients.csv")
    _write_coefficient_csv(coef_path, result, loaded.covariate_ids)
    names = [loaded.covariate_ids[j] for j in result.selected]
    print(
        f"fit: selected {len(result.selected)} of {data.J} covariates "
        f"({', '.join(names) if names else 'none'}); "
        f"converged={result.diagnostics.converged} "
        f"after {result.diagnostics.iterations} iterations; wrote {result_path}"
    )
    return 0


def cmd_cv(args):
    from . import storage, tuning

    defaults = {**FIT_DEFAULTS, **CV_EXTRA_DEFAULTS}
    options = _gather_options(args, defaults)
    data, _, meta = _load_and_preprocess(args.signals, args.response, options)
    basis = _basis_for(data, options)

    lambda1 = _float_list(options["lambda1"]) if options["lambda1"] else list(
        tuning.DEFAULT_LAMBDA1
    )
    lambda2 = _float_list(options["lambda2"]) if options["lambda2"] else list(
        tuning.DEFAULT_LAMBDA2
    )
    varphi = (
        _float_list(options["varphi"])
        if options["varphi"] != defaults["varphi"]
        else list(tuning.DEFAULT_VARPHI)
    )
    grid = tuning.TuningGrid(
        lambda1_values=tuple(lambda1),
        lambda2_values=tuple(lambda2),
        varphi_values=tuple(varphi),
        k_folds=int(options["folds"]),
        seed=int(options["seed"]),
    )
    solver_options = {
        "rho": float(options["rho"]),
        "eps_tol": float(options["eps_tol"]),
        "max_iter": int(options["max_iter"]),
    }
    cv = tuning.cross_validate(
        data, basis, grid, mode=options["mode"], solver_options=solver_options
    )
    best = cv.cells[cv.best]

    os.makedirs(args.out, exist_ok=True)
    cells_path = os.path.join(args.out, "cv_cells.csv")
    storage.write_cv_cells_csv(cells_path, cv)
    chosen = {
        "mode": options["mode"],
        "lambda1": best.lambda1,
        "lambda2": best.lambda2,
        "varphi": best.varphi,
        "knots": int(options["knots"]),
        "degree": int(options["degree"]),
        "rho": float(options["rho"]),
        "eps_tol": float(options["eps_tol"]),
        "max_iter": int(options["max_iter"]),
        "a": float(options["a"]),
    }
    chosen.update(meta)
    config_path = os.path.join(args.out, "chosen_config.json")
    storage.write_document(config_path, storage.config_to_document(chosen))
    print(
        f"cv: best cell lambda1={best.lambda1:g} lambda2={best.lambda2:g} "
        f"varphi={best.varphi:g} mean_pmse={best.mean_pmse:.6g} "
        f"({len(cv.cells)} cells); wrote {config_path}"
    )
    return 0


def cmd_predict(args):
    from . import model, simbench, storage

    doc = storage.read_document(args.result)
    result = storage.result_from_document(doc)
    meta = doc.get("metadata", {})
    options = dict(FIT_DEFAULTS)
    options.update(meta)  # replay the preprocessing used at fit time
    data, loaded, _ = _load_and_preprocess(args.signals, args.response, options)
    predictions = model.predict(result, data)

    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    storage.write_csv(
        args.out, ["subject_id", "y_hat"], zip(loaded.subject_ids, predictions)
    )
    message = f"predict: wrote {len(predictions)} predictions to {args.out}"
    if args.response:
        pmse = simbench.pmse(result, data)
        message += f" (pmse={pmse:.6g})"
    print(message)
    return 0


def cmd_benchmark(args):
    from . import simbench, storage, tuning

    spec = simbench.SimulationSpec(
        n_train=args.n,
        n_test=args.n_test,
        n_replicates=args.replicates,
        seed=args.seed,
        noise_sd=args.noise_sd,
        test_noise_sd=args.test_noise_sd,
        grid_points=args.grid_points,
    )
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for method in methods:
        if method not in ("fdos", "faddos"):
            raise ValueError(f"unknown method {method!r} (use fdos,faddos)")
    if args.lambda1 or args.lambda2 or args.varphi:
        grid = tuning.TuningGrid(
            lambda1_values=tuple(
                _float_list(args.lambda1 or ",".join(map(str, tuning.DEFAULT_LAMBDA1)))
            ),
            lambda2_values=tuple(
                _float_list(args.lambda2 or ",".join(map(str, tuning.DEFAULT_LAMBDA2)))
            ),
            varphi_values=tuple(
                _float_list(args.varphi or ",".join(map(str, tuning.DEFAULT_VARPHI)))
            ),
            k_folds=args.folds,
            seed=args.seed,
        )
    else:
        grid = tuning.default_grid(seed=args.seed, k_folds=args.folds)
    basis = simbench.estimation_basis(M_n=args.knots, d=args.degree)
    report = simbench.run_benchmark(
        spec, methods=methods, grid=grid, basis=basis, curve_points=args.curve_points
    )

    os.makedirs(args.out, exist_ok=True)
    storage.write_rows_csv(os.path.join(args.out, "replicates.csv"), report.rows)
    storage.write_aggregates_csv(
        os.path.join(args.out, "aggregates.csv"), report.aggregates
    )
    if report.curves:
        storage.write_rows_csv(
            os.path.join(args.out, "coefficients.csv"), report.curves
        )
    for method, agg in report.aggregates.items():
        print(
            f"benchmark[{method}]: pmse={agg.mean_pmse:.6g} (sd {agg.sd_pmse:.3g}) "
            f"tnr={agg.avg_tnr:.3f} sum_ise_nulls={agg.mean_sum_ise_nulls:.3g} "
            f"over {agg.n_replicates} replicates"
        )
    print(f"benchmark: wrote CSV tables to {args.out}")
    return 0


def _add_data_flags(parser, response_required):
    parser.add_argument("--signals", required=True, help="long-format signal CSV")
    parser.add_argument(
        "--response",
        required=response_required,
        help="response CSV (subject_id,y)",
    )
    parser.add_argument(
        "--pad",
        action="store_const",
        const=True,
        default=None,
        help="extend short series by their last observation",
    )
    parser.add_argument(
        "--resample", type=int, help="resample signals onto this many uniform points"
    )
    parser.add_argument(
        "--differentiate",
        action="store_const",
        const=True,
        default=None,
        help="replace signals by their first derivative",
    )
    parser.add_argument(
        "--fft",
        help="SAMPLE_RATE:F_MAX, replace signals by magnitude spectra on [0, F_MAX]",
    )
    parser.add_argument("--fft-window", choices=("hann", "rect"), dest="fft_window")


def _add_model_flags(parser):
    parser.add_argument("--config", help="config file (written by cv, or hand-made)")
    parser.add_argument("--mode", choices=("fdos", "faddos"))
    parser.add_argument("--knots", type=int, help="number of basis subintervals")
    parser.add_argument("--degree", type=int, help="spline degree")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="faddos",
        description="Doubly sparse scalar-on-function regression tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset as long CSVs")
    p.add_argument("--n", type=int, default=100, help="training subjects")
    p.add_argument("--n-test", type=int, default=100, dest="n_test")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=1.0, dest="noise_sd")
    p.add_argument("--test-noise-sd", type=float, default=0.0, dest="test_noise_sd")
    p.add_argument("--grid-points", type=int, default=201, dest="grid_points")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one model at fixed penalty levels")
    _add_data_flags(p, response_required=True)
    _add_model_flags(p)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--varphi", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="cross-validate the penalty levels")
    _add_data_flags(p, response_required=True)
    _add_model_flags(p)
    p.add_argument("--lambda1", help="comma-separated candidate values")
    p.add_argument("--lambda2", help="comma-separated candidate values")
    p.add_argument("--varphi", help="comma-separated candidate values")
    p.add_argument("--folds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="predict responses with a stored fit")
    p.add_argument("--result", required=True, help="result.json from fit")
    _add_data_flags(p, response_required=False)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("benchmark", help="replicate the simulation study")
    p.add_argument("--n", type=int, default=200, help="training subjects")
    p.add_argument("--n-test", type=int, default=200, dest="n_test")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=1.0, dest="noise_sd")
    p.add_argument("--test-noise-sd", type=float, default=0.0, dest="test_noise_sd")
    p.add_argument("--grid-points", type=int, default=201, dest="grid_points")
    p.add_argument("--methods", default="fdos,faddos")
    p.add_argument("--lambda1", help="comma-separated grid values")
    p.add_argument("--lambda2", help="comma-separated grid values")
    p.add_argument("--varphi", help="comma-separated grid values")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--knots", type=int, default=40)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument(
        "--curve-points",
        type=int,
        default=0,
        dest="curve_points",
        help="also sample fitted/true coefficient curves at this many points",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None):
    try:
        _apply_thread_override()
        parser = build_parser()
        args = parser.parse_args(argv)
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
