"""File formats: long-format CSV ingestion, result documents, CSV reports.

Result and config documents are JSON with every float printed at 17
significant digits, so write -> read -> write is byte-identical. All file
writes go through a temp file plus rename.
"""

import csv
import dataclasses
import io
import json
import os
import tempfile

import numpy as np

from .basis import EvalGrid, make_basis
from .design import FunctionalDataset
from .model import FitDiagnostics, FitResult
from .solver import SolverConfig

RESULT_FORMAT = "faddos-result"
CONFIG_FORMAT = "faddos-config"

SIGNAL_HEADER = ["subject_id", "covariate_id", "t", "value"]
RESPONSE_HEADER = ["subject_id", "y"]


# ---------------------------------------------------------------------------
# deterministic document serialization


def _format_float(x):
    if not np.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    text = format(float(x), ".17g")
    # keep integral floats typed as floats on the way back in
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def _render(obj, indent, out):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            out.write("{}")
            return
        out.write("{\n")
        for i, (key, value) in enumerate(obj.items()):
            out.write(pad + "  " + json.dumps(str(key)) + ": ")
            _render(value, indent + 2, out)
            out.write(",\n" if i < len(obj) - 1 else "\n")
        out.write(pad + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items):
            out.write("[" + ", ".join(_scalar(v) for v in items) + "]")
            return
        out.write("[\n")
        for i, value in enumerate(items):
            out.write(pad + "  ")
            _render(value, indent + 2, out)
            out.write(",\n" if i < len(items) - 1 else "\n")
        out.write(pad + "]")
    else:
        out.write(_scalar(obj))


def _scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, (int, np.integer)):
        return repr(int(v))
    if isinstance(v, (float, np.floating)):
        return _format_float(v)
    if isinstance(v, str):
        return json.dumps(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def dumps_document(doc):
    out = io.StringIO()
    _render(doc, 0, out)
    out.write("\n")
    return out.getvalue()


def loads_document(text):
    return json.loads(text)


def atomic_write_text(path, text):
    """Write via a sibling temp file and rename, so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_document(path, doc):
    atomic_write_text(path, dumps_document(doc))


def read_document(path):
    with open(path, "r") as handle:
        return loads_document(handle.read())


# ---------------------------------------------------------------------------
# fit results


def result_to_document(result, mode, fitted_values, metadata=None):
    basis = result.basis
    config = result.config_used
    doc = {
        "format": RESULT_FORMAT,
        "version": 1,
        "mode": mode,
        "config": {
            "lambda1": config.lambda1,
            "lambda2": config.lambda2,
            "varphi": config.varphi,
            "rho": config.rho,
            "eps_tol": config.eps_tol,
            "max_iter": config.max_iter,
            "nu_factor": config.nu_factor,
            "sweep": config.sweep,
            "fit_intercept": config.fit_intercept,
        },
        "weights": {
            "w1": list(result.weights_used[0]),
            "w2": list(result.weights_used[1]),
        },
        "basis": {
            "domain": [basis.domain_start, basis.domain_end],
            "M_n": basis.M_n,
            "degree": basis.d,
        },
        "mu_hat": result.mu_hat,
        "coefficients": [list(b) for b in result.b_star],
        "selected": list(result.selected),
        "zero_subregions": {
            str(j): [list(pair) for pair in result.zero_regions[j]]
            for j in result.selected
        },
        "diagnostics": {
            "iterations": result.diagnostics.iterations,
            "converged": result.diagnostics.converged,
            "objective": result.diagnostics.objective,
        },
        "fitted_values": list(fitted_values),
    }
    if metadata:
        doc["metadata"] = metadata
    return doc


def result_from_document(doc):
    if doc.get("format") != RESULT_FORMAT:
        raise ValueError("not a fit result document")
    cfg = doc["config"]
    w1 = np.asarray(doc["weights"]["w1"], dtype=float)
    w2 = np.asarray(doc["weights"]["w2"], dtype=float)
    config = SolverConfig(
        lambda1=cfg["lambda1"],
        lambda2=cfg["lambda2"],
        varphi=cfg["varphi"],
        rho=cfg["rho"],
        eps_tol=cfg["eps_tol"],
        max_iter=cfg["max_iter"],
        nu_factor=cfg["nu_factor"],
        sweep=cfg["sweep"],
        fit_intercept=cfg["fit_intercept"],
        w1=w1,
        w2=w2,
    )
    b = doc["basis"]
    basis = make_basis(tuple(b["domain"]), M_n=b["M_n"], d=b["degree"])
    diag = doc["diagnostics"]
    return FitResult(
        b_star=[np.asarray(c, dtype=float) for c in doc["coefficients"]],
        mu_hat=float(doc["mu_hat"]),
        selected=tuple(doc["selected"]),
        zero_regions={
            int(j): [tuple(pair) for pair in pairs]
            for j, pairs in doc["zero_subregions"].items()
        },
        weights_used=(w1, w2),
        config_used=config,
        diagnostics=FitDiagnostics(
            iterations=diag["iterations"],
            converged=diag["converged"],
            objective=diag["objective"],
        ),
        basis=basis,
    )


def config_to_document(values):
    doc = {"format": CONFIG_FORMAT, "version": 1}
    doc.update(values)
    return doc


def read_config(path):
    doc = read_document(path)
    if doc.get("format") != CONFIG_FORMAT:
        raise ValueError(f"{path}: not a config document")
    return {k: v for k, v in doc.items() if k not in ("format", "version")}


# ---------------------------------------------------------------------------
# CSV emission (floats at 17 significant digits, atomic writes)


def _cell_text(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return _format_float(v)
    return str(v)


def write_csv(path, header, rows):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell_text(v) for v in row])
    atomic_write_text(path, out.getvalue())


def write_long_csv(path, dataset, subject_ids, covariate_ids):
    rows = []
    for j, cov in enumerate(covariate_ids):
        X = dataset.X[j]
        for i, subject in enumerate(subject_ids):
            for t, value in zip(dataset.grid.points, X[i]):
                rows.append([subject, cov, t, value])
    write_csv(path, SIGNAL_HEADER, rows)


def write_response_csv(path, Y, subject_ids):
    write_csv(path, RESPONSE_HEADER, zip(subject_ids, Y))


def write_cv_cells_csv(path, cv):
    header = [
        "lambda1",
        "lambda2",
        "varphi",
        "mean_pmse",
        "sd_pmse",
        "convergence_rate",
        "chosen",
    ]
    rows = []
    for i, cell in enumerate(cv.cells):
        rows.append(
            [
                cell.lambda1,
                cell.lambda2,
                cell.varphi,
                cell.mean_pmse,
                cell.sd_pmse,
                cell.convergence_rate,
                i == cv.best,
            ]
        )
    write_csv(path, header, rows)


def write_rows_csv(path, rows):
    """Benchmark replicate rows; column order follows the first row."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    header = list(rows[0].keys())
    write_csv(path, header, ([row[k] for k in header] for row in rows))


def write_aggregates_csv(path, aggregates):
    methods = list(aggregates)
    header = [f.name for f in dataclasses.fields(aggregates[methods[0]])]
    write_csv(
        path,
        header,
        ([getattr(aggregates[m], f) for f in header] for m in methods),
    )


# ---------------------------------------------------------------------------
# long-format ingestion


@dataclasses.dataclass(frozen=True)
class LoadedData:
    dataset: FunctionalDataset
    subject_ids: tuple
    covariate_ids: tuple


def _read_rows(path, expected_header):
    with open(path, "r", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise ValueError(
                f"{path}: line 1: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValueError(
                    f"{path}: line {line_no}: expected {len(expected_header)} "
                    f"fields, got {len(row)}"
                )
            yield line_no, row


def _parse_float(path, line_no, name, text):
    try:
        return float(text)
    except ValueError:
        raise ValueError(
            f"{path}: line {line_no}: non-numeric {name} {text.strip()!r}"
        ) from None


def load_long_csv(path, response_path=None, pad=False):
    """Read long-format signals plus a response table into dense matrices.

    Subjects and covariates keep first-appearance order. Every series must
    cover the same uniform time grid; with ``pad=True`` a series may instead
    stop early on that grid and is extended by its last observation. Signal
    subjects and response subjects must match exactly. Without a response
    file the responses are all zero (prediction-only loading).
    """
    series = {}
    first_line = {}
    subjects, covariates = [], []
    for line_no, row in _read_rows(path, SIGNAL_HEADER):
        subject, covariate = row[0].strip(), row[1].strip()
        t = _parse_float(path, line_no, "t", row[2])
        value = _parse_float(path, line_no, "value", row[3])
        key = (subject, covariate)
        if key not in series:
            series[key] = {}
            first_line[key] = {}
        if t in series[key]:
            raise ValueError(
                f"{path}: line {line_no}: duplicate observation for subject "
                f"{subject!r}, covariate {covariate!r}, t={row[2].strip()} "
                f"(first seen at line {first_line[key][t]})"
            )
        series[key][t] = value
        first_line[key][t] = line_no
        if subject not in subjects:
            subjects.append(subject)
        if covariate not in covariates:
            covariates.append(covariate)
    if not series:
        raise ValueError(f"{path}: no observations")

    responses = dict.fromkeys(subjects, 0.0)
    if response_path is not None:
        responses = {}
        for line_no, row in _read_rows(response_path, RESPONSE_HEADER):
            subject = row[0].strip()
            if subject in responses:
                raise ValueError(
                    f"{response_path}: line {line_no}: duplicate response for "
                    f"subject {subject!r}"
                )
            responses[subject] = _parse_float(response_path, line_no, "y", row[1])
        for subject in subjects:
            if subject not in responses:
                raise ValueError(
                    f"subject {subject!r} has signals in {path} but no response "
                    f"in {response_path}"
                )
        extra = [s for s in responses if s not in subjects]
        if extra:
            raise ValueError(
                f"response subjects {extra!r} in {response_path} have no signals "
                f"in {path}"
            )

    grid_points = np.array(sorted({t for obs in series.values() for t in obs}))
    X = []
    for covariate in covariates:
        mat = np.empty((len(subjects), grid_points.size))
        for i, subject in enumerate(subjects):
            obs = series.get((subject, covariate))
            if obs is None:
                raise ValueError(
                    f"subject {subject!r} has no observations for covariate "
                    f"{covariate!r}"
                )
            ts = sorted(obs)
            if ts != list(grid_points[: len(ts)]):
                raise ValueError(
                    f"subject {subject!r}, covariate {covariate!r}: time points "
                    f"do not form a prefix of the common grid"
                )
            values = np.array([obs[t] for t in ts])
            if len(ts) < grid_points.size:
                if not pad:
                    raise ValueError(
                        f"subject {subject!r}, covariate {covariate!r}: observed "
                        f"{len(ts)} of {grid_points.size} grid points "
                        f"(pass pad=True to extend short series)"
                    )
                values = np.concatenate(
                    [values, np.full(grid_points.size - len(ts), values[-1])]
                )
            mat[i] = values
        X.append(mat)

    try:
        grid = EvalGrid(
            points=grid_points,
            spacing=(grid_points[-1] - grid_points[0]) / (grid_points.size - 1),
        )
    except ValueError as exc:
        raise ValueError(
            f"{path}: time grid is not uniform ({exc}); resample the signals "
            f"onto an equally spaced grid first"
        ) from None

    Y = np.array([responses[s] for s in subjects])
    dataset = FunctionalDataset(X=X, Y=Y, grid=grid)
    return LoadedData(
        dataset=dataset, subject_ids=tuple(subjects), covariate_ids=tuple(covariates)
    )
