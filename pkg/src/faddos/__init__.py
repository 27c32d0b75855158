"""Doubly sparse scalar-on-function regression.

Estimates functional linear models with many functional covariates under
a sparse-group penalty that yields both covariate-level selection and
exact zero subregions inside selected coefficient functions.
"""

from .basis import make_basis, make_grid
from .design import FunctionalDataset, build_block
from .model import (
    FitResult,
    compute_weights,
    fit,
    predict,
    reconstruct_coefficient,
    zero_subregions,
)
from .solver import SolverConfig, run_admm
from .tuning import TuningGrid, cross_validate, default_grid, select_best
from .simbench import SimulationSpec, run_benchmark, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "FitResult",
    "FunctionalDataset",
    "SimulationSpec",
    "SolverConfig",
    "TuningGrid",
    "build_block",
    "compute_weights",
    "cross_validate",
    "default_grid",
    "fit",
    "make_basis",
    "make_grid",
    "predict",
    "reconstruct_coefficient",
    "run_admm",
    "run_benchmark",
    "select_best",
    "simulate_dataset",
    "zero_subregions",
    "__version__",
]
