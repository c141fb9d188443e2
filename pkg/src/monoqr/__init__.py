"""Local polynomial quantile regression, monotonicity testing and simulation."""

from __future__ import annotations

__version__ = "0.1.0"

from .basis import Kernel, MultiIndexSet, ScaleMatrix, basis_eval, kernel_eval, multi_indices, scale_matrix
from .errors import (
    ConfigError,
    DegenerateError,
    InsufficientSupportError,
    MissingNodeError,
    MonoqrError,
    NonFiniteError,
    ParseError,
    QuadratureError,
    RankDeficientError,
    ResampleFitFailure,
)
from .estimator import (
    FitConfig,
    GridFits,
    LocalFit,
    LocalQuantileRegressor,
    Sample,
    derivative_estimate,
    fit_grid,
    fit_local,
)
from .bootstrap import BootstrapPlan, bootstrap_draws, resample
from .diagnostics import (
    RemainderReport,
    RemainderRow,
    TrueModel,
    linear_gaussian,
    location_scale_gaussian,
    m_matrix,
    model_bank,
    psi,
    psi_tilde,
    remainder_study,
)
from .grids import EvalGrid, make_grid
from .monotonicity import (
    Direction,
    TestOutcome,
    TestSpec,
    Variant,
    decide,
    lambda_p,
    statistic,
    statistic_from_matrix,
)
from .rng import substream
from .simulation import (
    CellResult,
    DgpSpec,
    McConfig,
    McReport,
    ModelId,
    generate,
    mean_function,
    report_json_dict,
    report_table_csv,
    run_mc,
    scatter_xy,
)
from .solver import QrSolution, WeightedQrProblem, check_loss, score, solve

__all__ = [
    "Kernel",
    "MultiIndexSet",
    "ScaleMatrix",
    "basis_eval",
    "kernel_eval",
    "multi_indices",
    "scale_matrix",
    "ConfigError",
    "DegenerateError",
    "InsufficientSupportError",
    "MissingNodeError",
    "MonoqrError",
    "NonFiniteError",
    "ParseError",
    "QuadratureError",
    "RankDeficientError",
    "ResampleFitFailure",
    "FitConfig",
    "GridFits",
    "LocalFit",
    "LocalQuantileRegressor",
    "Sample",
    "derivative_estimate",
    "fit_grid",
    "fit_local",
    "EvalGrid",
    "make_grid",
    "BootstrapPlan",
    "bootstrap_draws",
    "resample",
    "RemainderReport",
    "RemainderRow",
    "TrueModel",
    "linear_gaussian",
    "location_scale_gaussian",
    "m_matrix",
    "model_bank",
    "psi",
    "psi_tilde",
    "remainder_study",
    "Direction",
    "TestOutcome",
    "TestSpec",
    "Variant",
    "decide",
    "lambda_p",
    "statistic",
    "statistic_from_matrix",
    "CellResult",
    "DgpSpec",
    "McConfig",
    "McReport",
    "ModelId",
    "generate",
    "mean_function",
    "report_json_dict",
    "report_table_csv",
    "run_mc",
    "scatter_xy",
    "substream",
    "QrSolution",
    "WeightedQrProblem",
    "check_loss",
    "score",
    "solve",
    "__version__",
]
