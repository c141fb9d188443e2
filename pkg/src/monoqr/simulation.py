"""Monte Carlo harness for the bootstrap monotonicity test.

Six data-generating processes with covariates uniform on [0, 1] drive
rejection frequencies of the derivative-sign test over a (bandwidth, alpha)
table.  The null model is pure multiplicative noise X^4 * N(0, sd^2), whose
conditional median is flat; the alternatives add a shaped mean function to
noise V^4 * N(0, sd^2) scaled by an independent uniform V, the same
marginal noise law without the covariate link.
Every replication derives its sample and bootstrap randomness from a
counter-based substream addressed by (seed, cell, replication), so reports
are bit-identical across runs and worker counts.
"""

from __future__ import annotations

import enum
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import BootstrapPlan, bootstrap_draws
from .errors import MonoqrError
from .estimator import FitConfig, Sample, fit_grid
from .grids import EvalGrid, make_grid
from .monotonicity import Direction, TestSpec, decide, statistic
from .rng import substream
from .validation import check_alpha, check_positive

__all__ = [
    "ModelId",
    "DgpSpec",
    "McConfig",
    "CellResult",
    "McReport",
    "mean_function",
    "generate",
    "run_mc",
    "scatter_xy",
    "report_table_csv",
    "report_json_dict",
]


class ModelId(str, enum.Enum):
    """Mean-function bank: the flat null and five shaped alternatives."""

    NULL = "null"
    ALT1 = "alt1"
    ALT2 = "alt2"
    ALT3 = "alt3"
    ALT4 = "alt4"
    ALT5 = "alt5"


def mean_function(model: ModelId, x):
    """Conditional mean m_j(x) of the requested model, vectorized over x."""
    model = ModelId(model)
    x_arr = np.asarray(x, dtype=np.float64)
    if model is ModelId.NULL:
        out = np.zeros_like(x_arr)
    elif model is ModelId.ALT1:
        out = x_arr * (1.0 - x_arr)
    elif model is ModelId.ALT2:
        out = -0.1 * x_arr
    elif model is ModelId.ALT3:
        out = -0.1 * np.exp(-50.0 * (x_arr - 0.5) ** 2)
    elif model is ModelId.ALT4:
        out = x_arr + 0.6 * np.exp(-10.0 * x_arr**2)
    else:
        out = np.where(
            x_arr < 0.5, 10.0 * (x_arr - 0.5) ** 3, 0.1 * (x_arr - 0.5)
        ) - 2.0 * np.exp(-10.0 * (x_arr - 0.5) ** 2)
    if np.isscalar(x) or x_arr.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class DgpSpec:
    """One data-generating process: model id, sample size and noise scale.

    noise_sd is the standard deviation of the Gaussian factor Z of the
    noise.  The null model's outcome is Y = X^4 Z, so its error scale is
    covariate-linked and essentially degenerate near x = 0; the alternative
    models use Y = m(X) + V^4 Z with V ~ Unif[0,1] drawn independently of
    X, keeping the marginal noise law while giving every region of the
    design space a comparable signal-to-noise ratio.
    """

    model: ModelId
    n: int
    noise_sd: float = math.sqrt(0.1)

    def __post_init__(self) -> None:
        object.__setattr__(self, "model", ModelId(self.model))
        if int(self.n) < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        sd = float(self.noise_sd)
        if not np.isfinite(sd) or sd < 0.0:
            raise ValueError(f"noise_sd must be a nonnegative finite number, got {sd!r}")
        object.__setattr__(self, "noise_sd", sd)


def generate(spec: DgpSpec, rng: np.random.Generator) -> Sample:
    """Draw one sample of the requested bank model.

    Null: Y = X^4 Z.  Alternatives: Y = m(X) + V^4 Z with V ~ Unif[0,1]
    independent of X.  Z is N(0, 1) scaled by noise_sd in both cases.
    """
    x = rng.uniform(0.0, 1.0, spec.n)
    z = rng.normal(0.0, 1.0, spec.n) * spec.noise_sd
    if spec.model is ModelId.NULL:
        y = x**4 * z
    else:
        v = rng.uniform(0.0, 1.0, spec.n)
        y = mean_function(spec.model, x) + v**4 * z
    return Sample.from_xy(y, x)


@dataclass(frozen=True)
class McConfig:
    """Full experiment description; identical configs give identical reports.

    The default statistic is the one-quantile derivative test at tau = 0.5
    against H0: g >= 0, matching the experiment bank's alternatives, which
    violate nondecreasingness.  eta defaults to 1e-6 here: far below the
    scale of the bootstrap quantiles at the default noise level, so the
    critical-value floor only guards the degenerate case where every
    recentered draw is exactly zero.
    """

    null_replications: int = 500
    alt_replications: int = 100
    bootstrap_b: int = 200
    bandwidths: tuple[float, ...] = (0.9, 1.0, 1.1)
    alphas: tuple[float, ...] = (0.10, 0.05, 0.01)
    seed: int = 0
    models: tuple[ModelId, ...] = tuple(ModelId)
    n: int = 200
    noise_sd: float = math.sqrt(0.1)
    degree: int = 1
    eta: float = 1e-6
    spec: TestSpec = field(
        default_factory=lambda: TestSpec(p=2.0, direction=Direction.NON_NEGATIVE)
    )
    grid: EvalGrid = field(default_factory=make_grid)
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("null_replications", "alt_replications", "bootstrap_b", "n"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
            object.__setattr__(self, name, int(getattr(self, name)))
        if len(self.bandwidths) == 0 or len(self.alphas) == 0 or len(self.models) == 0:
            raise ValueError("bandwidths, alphas and models must be nonempty")
        object.__setattr__(
            self, "bandwidths", tuple(check_positive(h, "bandwidth") for h in self.bandwidths)
        )
        object.__setattr__(self, "alphas", tuple(check_alpha(a) for a in self.alphas))
        object.__setattr__(self, "models", tuple(ModelId(m) for m in self.models))
        object.__setattr__(self, "seed", int(self.seed))
        if int(self.workers) < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        object.__setattr__(self, "workers", int(self.workers))

    def replications_for(self, model: ModelId) -> int:
        return self.null_replications if model is ModelId.NULL else self.alt_replications


@dataclass(frozen=True)
class CellResult:
    """Rejection counts of one (model, bandwidth) cell, aligned with alphas."""

    model: ModelId
    h: float
    replications: int
    rejections: tuple[int, ...]
    frequencies: tuple[float, ...]

    def __post_init__(self) -> None:
        for rej, freq in zip(self.rejections, self.frequencies):
            if not 0 <= rej <= self.replications:
                raise ValueError("rejection count outside 0..replications")
            if not 0.0 <= freq <= 1.0:
                raise ValueError("rejection frequency outside [0, 1]")


@dataclass(frozen=True)
class McReport:
    """Table of rejection frequencies plus any failed cells and the runtime."""

    alphas: tuple[float, ...]
    cells: tuple[CellResult, ...]
    failures: tuple[tuple[str, float, str], ...]
    runtime: float

    def frequency(self, model: ModelId, h: float, alpha: float) -> float:
        """Rejection frequency of one cell at one level."""
        for cell in self.cells:
            if cell.model is ModelId(model) and np.isclose(cell.h, h):
                for a, freq in zip(self.alphas, cell.frequencies):
                    if np.isclose(a, alpha):
                        return freq
        raise KeyError(f"no cell for model={model}, h={h}, alpha={alpha}")


def _one_replication(
    cfg: McConfig, model: ModelId, h: float, stream: int
) -> tuple[bool, ...]:
    """Generate, fit, bootstrap and decide at every alpha with shared draws."""
    rng = substream(cfg.seed, stream, 0)
    sample = generate(DgpSpec(model=model, n=cfg.n, noise_sd=cfg.noise_sd), rng)
    fit_cfg = FitConfig(degree=cfg.degree, bandwidth=h)
    fits = fit_grid(sample, cfg.grid, fit_cfg)
    stat = statistic(fits, cfg.spec)
    plan = BootstrapPlan(n_resamples=cfg.bootstrap_b, seed=cfg.seed, stream=stream)
    draws = bootstrap_draws(sample, cfg.grid, fit_cfg, cfg.spec, plan)
    return tuple(
        decide(stat, draws, alpha=a, eta=cfg.eta, h=h).reject for a in cfg.alphas
    )


def _mc_worker(args) -> tuple[bool, ...]:
    cfg, model, h, stream = args
    return _one_replication(cfg, model, h, stream)


def run_mc(config: McConfig) -> McReport:
    """Run every (model, bandwidth) cell and tabulate rejection frequencies.

    Replication r of cell c uses substreams keyed by (seed, c << 32 | r, .),
    so outputs do not depend on scheduling; a failed replication marks its
    whole cell failed and the run continues with the next cell.
    """
    t0 = time.perf_counter()
    cells: list[CellResult] = []
    failures: list[tuple[str, float, str]] = []
    executor = (
        ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    )
    try:
        for mi, model in enumerate(config.models):
            reps = config.replications_for(model)
            for hi, h in enumerate(config.bandwidths):
                cell = mi * len(config.bandwidths) + hi
                args = [(config, model, h, (cell << 32) | r) for r in range(reps)]
                try:
                    if executor is None:
                        results = [_mc_worker(a) for a in args]
                    else:
                        chunk = max(1, reps // (4 * config.workers))
                        results = list(executor.map(_mc_worker, args, chunksize=chunk))
                except (MonoqrError, RuntimeError) as exc:
                    failures.append((model.value, float(h), str(exc)))
                    continue
                rej = np.sum(np.asarray(results, dtype=bool), axis=0)
                cells.append(
                    CellResult(
                        model=model,
                        h=float(h),
                        replications=reps,
                        rejections=tuple(int(v) for v in rej),
                        frequencies=tuple(float(v) / reps for v in rej),
                    )
                )
    finally:
        if executor is not None:
            executor.shutdown()
    return McReport(
        alphas=config.alphas,
        cells=tuple(cells),
        failures=tuple(failures),
        runtime=time.perf_counter() - t0,
    )


def scatter_xy(
    model: ModelId, n: int, seed: int, noise_sd: float = math.sqrt(0.1)
) -> tuple[np.ndarray, np.ndarray]:
    """One deterministic (x, y) sample per (seed, model) for plotting."""
    order = tuple(ModelId)
    rng = substream(seed, 2**40 + order.index(ModelId(model)))
    sample = generate(DgpSpec(model=model, n=n, noise_sd=noise_sd), rng)
    return sample.covariates[:, 0].copy(), sample.outcomes[:, 0].copy()


def report_table_csv(report: McReport) -> str:
    """Wide rejection-frequency table: one row per (model, bandwidth) cell.

    Failed cells appear with NA frequencies.  Contains no timing data, so
    identical configurations serialize to identical bytes.
    """
    header = "model,h," + ",".join(f"alpha_{a:g}" for a in report.alphas)
    lines = [header]
    for cell in report.cells:
        freqs = ",".join(f"{f:.6f}" for f in cell.frequencies)
        lines.append(f"{cell.model.value},{cell.h:g},{freqs}")
    for model_value, h, _ in report.failures:
        na = ",".join("NA" for _ in report.alphas)
        lines.append(f"{model_value},{h:g},{na}")
    return "\n".join(lines) + "\n"


def report_json_dict(report: McReport) -> dict:
    """JSON-ready report mapping; excludes the runtime so outputs are stable."""
    return {
        "alphas": [float(a) for a in report.alphas],
        "cells": [
            {
                "model": cell.model.value,
                "h": cell.h,
                "replications": cell.replications,
                "rejections": list(cell.rejections),
                "frequencies": list(cell.frequencies),
            }
            for cell in report.cells
        ],
        "failures": [
            {"model": m, "h": h, "message": msg} for m, h, msg in report.failures
        ],
    }
