"""Pair bootstrap of the grid fit and recentered test-statistic draws.

Each resample redraws whole observations with replacement and refits the
entire (x, tau) grid with the original configuration; the draw is the test
statistic of the recentered derivative field ghat_star - ghat.  Resample b
is generated from its own counter-based substream keyed by
(seed, stream, 1 + b), so the draw vector is identical under any execution
order or worker count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ResampleFitFailure
from .estimator import FitConfig, Sample, _expand_rows, _gamma_grid, fit_grid
from .grids import EvalGrid
from .monotonicity import TestSpec, statistic_from_matrix
from .rng import substream
from .solver import _OK

__all__ = ["BootstrapPlan", "resample", "bootstrap_draws"]


@dataclass(frozen=True)
class BootstrapPlan:
    """Resample count and RNG addressing for one bootstrap run."""

    n_resamples: int
    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        if int(self.n_resamples) < 1:
            raise ValueError(f"n_resamples must be >= 1, got {self.n_resamples}")
        object.__setattr__(self, "n_resamples", int(self.n_resamples))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "stream", int(self.stream))


def resample(sample: Sample, rng: np.random.Generator) -> Sample:
    """Pair-bootstrap resample: n whole (Y, X, L) rows drawn with replacement."""
    idx = rng.integers(0, sample.n, size=sample.n)
    return Sample(
        outcomes=sample.outcomes[idx],
        covariates=sample.covariates[idx],
        counts=sample.counts[idx],
    )


def bootstrap_draws(
    sample: Sample,
    grid: EvalGrid,
    cfg: FitConfig,
    spec: TestSpec,
    plan: BootstrapPlan,
    on_error: str = "error",
) -> np.ndarray:
    """Recentered bootstrap statistics, one per resample, in resample order.

    Refits use the resample's observation multiplicities as row weights,
    which leaves the check-loss objective (a sum over resampled rows)
    unchanged while keeping window membership computations on the original
    rows.  A refit failure at any node raises ResampleFitFailure under the
    default policy; ``on_error="skip-and-warn"`` drops that draw with a
    warning instead, shortening the returned vector.
    """
    if on_error not in ("error", "skip-and-warn"):
        raise ValueError(f"unknown on_error policy {on_error!r}")
    base = fit_grid(sample, grid, cfg)
    ghat0 = base.ghat
    responses, rows_x, origin = _expand_rows(sample, cfg.outcome_class)
    xcol = np.ascontiguousarray(rows_x[:, 0])
    n = sample.n
    draws = np.empty(plan.n_resamples)
    kept = np.ones(plan.n_resamples, dtype=bool)
    for b in range(plan.n_resamples):
        rng = substream(plan.seed, plan.stream, 1 + b)
        idx = rng.integers(0, n, size=n)
        mult = np.bincount(idx, minlength=n).astype(np.float64)
        gamma, _, status = _gamma_grid(responses, xcol, mult[origin], grid, cfg)
        bad = np.argwhere(status != _OK)
        if bad.size:
            ix, itau = bad[0]
            node = (float(grid.x_nodes[ix]), float(grid.tau_nodes[itau]))
            if on_error == "error":
                raise ResampleFitFailure(b, node, "window lost support in the resample")
            warnings.warn(
                f"dropping bootstrap resample {b}: refit failed at node {node}",
                RuntimeWarning,
                stacklevel=2,
            )
            kept[b] = False
            continue
        draws[b] = statistic_from_matrix(gamma[:, :, 1] - ghat0, grid, spec)
    return draws[kept]
