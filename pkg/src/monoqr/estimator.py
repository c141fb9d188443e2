"""Local polynomial quantile regression over points and evaluation grids.

Fits are computed in scaled coordinates c((X_i - x) / h) for conditioning,
then rescaled so reported coefficients are in raw derivative units: entry 0
estimates the conditional quantile level and, for d = 1, entry 1 estimates
its x-derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .basis import Kernel, basis_eval, kernel_eval, multi_indices, scale_matrix
from .errors import InsufficientSupportError, NonFiniteError, RankDeficientError
from .grids import EvalGrid
from .solver import (
    _DEGENERATE,
    _ITERATION_LIMIT,
    _NO_SUPPORT,
    _OK,
    _RANK_DEFICIENT,
    _simplex,
    solve,
    WeightedQrProblem,
)
from .validation import as_float_array, check_positive, check_tau

__all__ = [
    "Sample",
    "FitConfig",
    "LocalFit",
    "GridFits",
    "fit_local",
    "fit_grid",
    "derivative_estimate",
    "LocalQuantileRegressor",
]


@dataclass(frozen=True)
class Sample:
    """Observations (Y_i, X_i, L_i): outcome block, covariates, outcome count.

    Row i of ``outcomes`` holds B_{1i}..B_{Lbar,i}; entries beyond counts[i]
    are unused and may hold any value.  The scalar case has one outcome
    column and counts identically 1.
    """

    outcomes: np.ndarray
    covariates: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        y = as_float_array(self.outcomes, "outcomes")
        if y.ndim == 1:
            y = y.reshape(-1, 1)
        x = as_float_array(self.covariates, "covariates")
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        n = y.shape[0]
        if n < 1:
            raise ValueError("sample must contain at least one observation")
        if x.shape[0] != n or counts.shape[0] != n:
            raise ValueError("outcomes, covariates and counts must have equal length")
        lbar = y.shape[1]
        if np.any(counts < 1) or np.any(counts > lbar):
            raise ValueError(f"counts must lie in 1..{lbar}")
        used = np.arange(lbar)[None, :] < counts[:, None]
        if not np.all(np.isfinite(y[used])):
            raise NonFiniteError("outcomes contain non-finite used entries")
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("covariates contain non-finite entries")
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "covariates", x)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_xy(cls, y, x) -> "Sample":
        """Scalar-outcome sample from response vector y and covariates x."""
        y = as_float_array(y, "y", ndim=1)
        return cls(outcomes=y.reshape(-1, 1), covariates=x, counts=np.ones(len(y), dtype=np.int64))

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class FitConfig:
    """Local fit settings: degree, bandwidth, kernel and outcome class."""

    degree: int = 1
    bandwidth: float = 1.0
    kernel: Kernel = Kernel.UNIFORM
    outcome_class: int = 1

    def __post_init__(self) -> None:
        if int(self.degree) < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        check_positive(self.bandwidth, "bandwidth")
        if int(self.outcome_class) < 1:
            raise ValueError(f"outcome_class must be >= 1, got {self.outcome_class}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        object.__setattr__(self, "outcome_class", int(self.outcome_class))


@dataclass(frozen=True)
class LocalFit:
    """Fitted coefficients at one (x, tau), in derivative units."""

    x: float | np.ndarray
    tau: float
    gamma_hat: np.ndarray
    effective_n: int


@dataclass(frozen=True)
class GridFits:
    """Local fits on a full (x, tau) grid, stored as dense arrays."""

    grid: EvalGrid
    config: FitConfig
    gamma: np.ndarray = field(repr=False)
    effective_n: np.ndarray = field(repr=False)

    @property
    def ghat(self) -> np.ndarray:
        """Derivative estimates e_2' gamma_hat, shape (n_x, n_tau)."""
        return self.gamma[:, :, 1]

    @property
    def qhat(self) -> np.ndarray:
        """Level estimates, shape (n_x, n_tau)."""
        return self.gamma[:, :, 0]

    def __getitem__(self, key: tuple[int, int]) -> LocalFit:
        ix, itau = key
        return LocalFit(
            x=float(self.grid.x_nodes[ix]),
            tau=float(self.grid.tau_nodes[itau]),
            gamma_hat=self.gamma[ix, itau].copy(),
            effective_n=int(self.effective_n[ix, itau]),
        )


def _expand_rows(sample: Sample, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Response rows for class k: observation i with L_i = k contributes its
    first k outcomes, all sharing covariate row i.  Returns (responses,
    covariate rows, origin index of each row)."""
    sel = np.flatnonzero(sample.counts == k)
    if k == 1:
        return (
            np.ascontiguousarray(sample.outcomes[sel, 0]),
            np.ascontiguousarray(sample.covariates[sel]),
            sel,
        )
    origin = np.repeat(sel, k)
    responses = sample.outcomes[sel, :k].reshape(-1)
    return (
        np.ascontiguousarray(responses),
        np.ascontiguousarray(sample.covariates[origin]),
        origin,
    )


@njit(cache=True)
def _grid_solve(y, x, w, x_nodes, taus, h, p):
    """Solve the scaled local fit at every (x node, tau) for d = 1 data.

    Rows enter a node's problem when their base weight is positive and the
    scaled offset lies in the closed window [-1/2, 1/2].  Returned
    coefficients are in scaled units (powers of (X_i - x) / h).
    """
    n_x = x_nodes.shape[0]
    n_t = taus.shape[0]
    nrows = y.shape[0]
    gammas = np.zeros((n_x, n_t, p))
    effn = np.zeros((n_x, n_t), dtype=np.int64)
    status = np.zeros((n_x, n_t), dtype=np.int64)
    ys = np.empty(nrows)
    ws = np.empty(nrows)
    C = np.empty((nrows, p))
    for ix in range(n_x):
        xn = x_nodes[ix]
        m = 0
        for i in range(nrows):
            if w[i] > 0.0:
                z = (x[i] - xn) / h
                if -0.5 <= z <= 0.5:
                    ys[m] = y[i]
                    ws[m] = w[i]
                    C[m, 0] = 1.0
                    acc = 1.0
                    for j in range(1, p):
                        acc *= z
                        C[m, j] = acc
                    m += 1
        for it in range(n_t):
            effn[ix, it] = m
            if m < p:
                status[ix, it] = _NO_SUPPORT
                continue
            g, _, _, st, _ = _simplex(ys[:m], C[:m], ws[:m], taus[it], 1000 + 50 * m)
            gammas[ix, it] = g
            status[ix, it] = st
    return gammas, effn, status


def _raise_node_status(status: int, x: float, tau: float, p: int) -> None:
    node = f"grid node x={x:g}, tau={tau:g}"
    if status == _NO_SUPPORT or status == _DEGENERATE:
        raise InsufficientSupportError(
            f"fewer than {p} positively weighted observations in the window at {node}"
        )
    if status == _RANK_DEFICIENT:
        raise RankDeficientError(f"window design does not span R^{p} at {node}")
    if status == _ITERATION_LIMIT:
        raise RuntimeError(f"pivot iteration limit exceeded at {node}")
    if status != _OK:
        raise RuntimeError(f"numerical failure in the solver at {node}")


def _gamma_grid(
    y: np.ndarray,
    x: np.ndarray,
    w: np.ndarray,
    grid: EvalGrid,
    cfg: FitConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Derivative-unit coefficients on the grid from flat d = 1 row arrays."""
    p = cfg.degree + 1
    raw, effn, status = _grid_solve(
        y, x, w, grid.x_nodes, grid.tau_nodes, cfg.bandwidth, p
    )
    unscale = cfg.bandwidth ** np.arange(p, dtype=np.float64)
    return raw / unscale, effn, status


def fit_local(sample: Sample, x, tau: float, cfg: FitConfig) -> LocalFit:
    """Fit the local polynomial quantile regression at one point.

    Builds one response row per outcome of every class-k observation, with
    design c((X_i - x) / h) and kernel weight, solves exactly, and rescales
    the coefficients to derivative units.
    """
    tau = check_tau(tau)
    x_point = np.atleast_1d(as_float_array(x, "x"))
    if x_point.shape[0] != sample.d:
        raise ValueError(f"evaluation point has dimension {x_point.shape[0]}, sample has d={sample.d}")
    index_set = multi_indices(sample.d, cfg.degree)
    p = len(index_set)
    responses, rows_x, _ = _expand_rows(sample, cfg.outcome_class)
    z = (rows_x - x_point[None, :]) / cfg.bandwidth
    weights = kernel_eval(cfg.kernel, -z) if z.size else np.zeros(0)
    pos = weights > 0.0
    m = int(np.count_nonzero(pos))
    if m < p:
        raise InsufficientSupportError(
            f"window at x={np.asarray(x)} holds {m} observations, need at least {p}"
        )
    design = basis_eval(index_set, z[pos])
    problem = WeightedQrProblem(
        responses=responses[pos], design=design, weights=np.ones(m), tau=tau
    )
    solution = solve(problem)
    gamma = solution.coefficients / scale_matrix(index_set, cfg.bandwidth).diagonal
    x_out = float(x_point[0]) if sample.d == 1 else x_point
    return LocalFit(x=x_out, tau=tau, gamma_hat=gamma, effective_n=m)


def derivative_estimate(fit: LocalFit) -> float:
    """First-derivative coefficient of a univariate fit."""
    if np.size(fit.x) != 1:
        raise ValueError("derivative_estimate requires a univariate fit (d = 1)")
    return float(fit.gamma_hat[1])


def fit_grid(sample: Sample, grid: EvalGrid, cfg: FitConfig) -> GridFits:
    """Fit every (x, tau) node of the grid; any node failure aborts the grid.

    Restricted to d = 1, which is the testing pipeline's case; use fit_local
    directly for higher-dimensional covariates.
    """
    if sample.d != 1:
        raise ValueError("fit_grid requires univariate covariates (d = 1)")
    responses, rows_x, _ = _expand_rows(sample, cfg.outcome_class)
    gamma, effn, status = _gamma_grid(
        responses, rows_x[:, 0], np.ones(len(responses)), grid, cfg
    )
    bad = np.argwhere(status != _OK)
    if bad.size:
        ix, itau = bad[0]
        _raise_node_status(
            int(status[ix, itau]),
            float(grid.x_nodes[ix]),
            float(grid.tau_nodes[itau]),
            cfg.degree + 1,
        )
    return GridFits(grid=grid, config=cfg, gamma=gamma, effective_n=effn)


class LocalQuantileRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn style wrapper around the local polynomial quantile fit.

    Parameters
    ----------
    tau : float, default 0.5
        Quantile level in (0, 1).
    degree : int, default 1
        Local polynomial degree (at least 1).
    bandwidth : float, default 0.5
        Kernel window half-widths are bandwidth / 2 per coordinate.
    """

    def __init__(self, tau: float = 0.5, degree: int = 1, bandwidth: float = 0.5) -> None:
        self.tau = tau
        self.degree = degree
        self.bandwidth = bandwidth

    def fit(self, X, y):
        X, y = validate_data(self, X=X, y=y, ensure_min_samples=2)
        self.sample_ = Sample.from_xy(np.asarray(y, dtype=np.float64), X)
        self.config_ = FitConfig(degree=self.degree, bandwidth=self.bandwidth)
        check_tau(self.tau)
        return self

    def _fit_points(self, X) -> list[LocalFit]:
        check_is_fitted(self, "sample_")
        X = validate_data(self, X=X, reset=False)
        return [fit_local(self.sample_, row, self.tau, self.config_) for row in X]

    def predict(self, X) -> np.ndarray:
        """Conditional tau-quantile estimates at the rows of X."""
        return np.array([f.gamma_hat[0] for f in self._fit_points(X)])

    def predict_derivative(self, X) -> np.ndarray:
        """First-derivative estimates at the rows of X (univariate only)."""
        return np.array([derivative_estimate(f) for f in self._fit_points(X)])
