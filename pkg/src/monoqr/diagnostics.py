"""Score diagnostics for the local estimator's linear representation.

Under a model with known conditional quantiles, the scaled estimation error
sqrt(n h^d) H (gamma_hat - gamma) should track M^{-1} times a normalized
score vector, up to a remainder shrinking like sqrt(log n) / (n^(1/4) h^(d/4)).
This module computes the two score flavors (psi, built from residuals
against the local polynomial gamma' c(X_i - x); psi_tilde, built from
residuals against the exact conditional quantile), the moment matrix M by
adaptive quadrature, and empirical sup-norm remainders for both the
estimator and its pair-bootstrap analogue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .basis import basis_eval, kernel_eval, multi_indices
from .errors import QuadratureError
from .estimator import (
    FitConfig,
    Sample,
    _expand_rows,
    _gamma_grid,
    _raise_node_status,
    fit_grid,
)
from .grids import EvalGrid
from .rng import substream
from .solver import _OK

__all__ = [
    "TrueModel",
    "RemainderRow",
    "RemainderReport",
    "psi",
    "psi_tilde",
    "m_matrix",
    "remainder_study",
    "model_bank",
    "linear_gaussian",
    "location_scale_gaussian",
]


@dataclass(frozen=True)
class TrueModel:
    """Analytic description of a univariate DGP with known quantile field.

    All callables are vectorized over x.  ``gamma(tau, x, degree)`` returns
    the derivative-unit coefficient vector (q, q', q''/2!, ...) of length
    degree + 1; ``cond_density(tau, x)`` is the conditional density of
    Y - q(tau|X) at zero given X = x; ``class_prob(x)`` is P{L = k | X = x}
    for the model's outcome class.
    """

    name: str
    quantile: Callable
    gamma: Callable
    density: Callable
    cond_density: Callable
    class_prob: Callable
    support: tuple[float, float]

    def check(self) -> None:
        """Verify density mass and quantile monotonicity on sampled grids."""
        lo, hi = self.support
        total, _ = integrate.quad(lambda v: float(self.density(v)), lo, hi, limit=200)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"{self.name}: density integrates to {total:.8f}, not 1")
        span = hi - lo
        xs = np.linspace(lo + 0.01 * span, hi - 0.01 * span, 21)
        taus = np.linspace(0.05, 0.95, 19)
        for x in xs:
            q_vals = np.array([float(self.quantile(t, x)) for t in taus])
            if np.any(np.diff(q_vals) < -1e-12):
                raise ValueError(f"{self.name}: quantile not nondecreasing in tau at x={x:g}")
            for t in taus:
                if float(self.cond_density(t, x)) < 0.0 or float(self.density(x)) < 0.0:
                    raise ValueError(f"{self.name}: negative density at x={x:g}")


@dataclass(frozen=True)
class RemainderRow:
    """One sup-norm remainder measurement."""

    variant: str
    n: int
    replication: int
    sup_remainder: float
    envelope: float

    def __post_init__(self) -> None:
        if not self.sup_remainder >= 0.0:
            raise ValueError("sup_remainder must be nonnegative")
        if not self.envelope > 0.0:
            raise ValueError("envelope must be positive")


@dataclass(frozen=True)
class RemainderReport:
    """Sup-norm remainders per (variant, n, replication) with envelopes."""

    rows: tuple[RemainderRow, ...]

    def n_values(self, variant: str) -> tuple[int, ...]:
        seen: list[int] = []
        for row in self.rows:
            if row.variant == variant and row.n not in seen:
                seen.append(row.n)
        return tuple(seen)

    def medians(self, variant: str) -> dict[int, float]:
        """Median sup-remainder per n for one variant."""
        out: dict[int, float] = {}
        for n in self.n_values(variant):
            vals = [r.sup_remainder for r in self.rows if r.variant == variant and r.n == n]
            out[n] = float(np.median(vals))
        return out

    def normalized_medians(self, variant: str) -> dict[int, float]:
        """Median sup-remainder divided by the theoretical envelope, per n."""
        out: dict[int, float] = {}
        for n in self.n_values(variant):
            rows = [r for r in self.rows if r.variant == variant and r.n == n]
            med = float(np.median([r.sup_remainder for r in rows]))
            out[n] = med / rows[0].envelope
        return out

    def to_csv(self) -> str:
        lines = ["variant,n,replication,sup_remainder,envelope"]
        for r in self.rows:
            lines.append(
                f"{r.variant},{r.n},{r.replication},"
                f"{r.sup_remainder:.10g},{r.envelope:.10g}"
            )
        return "\n".join(lines) + "\n"


def _weighted_score(
    rows_x: np.ndarray,
    row_weights: np.ndarray,
    residuals: np.ndarray,
    n_obs: int,
    x,
    tau: float,
    cfg: FitConfig,
) -> np.ndarray:
    """Common score form -(n h^d)^(-1/2) sum w_i ltilde(u_i) c(z_i) K(z_i)."""
    x_point = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = rows_x.shape[1]
    h = cfg.bandwidth
    index_set = multi_indices(d, cfg.degree)
    z = (rows_x - x_point[None, :]) / h
    kern = kernel_eval(cfg.kernel, z) if len(rows_x) else np.zeros(0)
    sel = (kern > 0.0) & (row_weights > 0.0)
    if not np.any(sel):
        return np.zeros(len(index_set))
    ltil = tau - (residuals[sel] <= 0.0)
    design = basis_eval(index_set, z[sel])
    scale = -1.0 / math.sqrt(n_obs * h**d)
    return scale * ((row_weights[sel] * ltil * kern[sel]) @ design)


def psi(sample: Sample, x, tau: float, cfg: FitConfig, model: TrueModel) -> np.ndarray:
    """Score with residuals against the local polynomial of the true field.

    Residuals are Delta_i = B_li - gamma(tau, x)' c(X_i - x), with c in raw
    (unscaled) offsets; the basis inside the sum uses scaled offsets.
    """
    responses, rows_x, _ = _expand_rows(sample, cfg.outcome_class)
    x_point = np.atleast_1d(np.asarray(x, dtype=np.float64))
    index_set = multi_indices(sample.d, cfg.degree)
    gamma_true = np.asarray(model.gamma(tau, float(x_point[0]), cfg.degree), dtype=np.float64)
    delta = responses - basis_eval(index_set, rows_x - x_point[None, :]) @ gamma_true
    return _weighted_score(rows_x, np.ones(len(responses)), delta, sample.n, x, tau, cfg)


def psi_tilde(
    sample: Sample, x, tau: float, cfg: FitConfig, model: TrueModel
) -> np.ndarray:
    """Score with residuals against the exact conditional quantile.

    eps_i = B_li - q(tau | X_i), making each summand conditionally centered
    given X_i, so Monte Carlo means of every component vanish under the model.
    """
    responses, rows_x, _ = _expand_rows(sample, cfg.outcome_class)
    eps = responses - np.asarray(model.quantile(tau, rows_x[:, 0]), dtype=np.float64)
    return _weighted_score(rows_x, np.ones(len(responses)), eps, sample.n, x, tau, cfg)


def m_matrix(x, tau: float, cfg: FitConfig, model: TrueModel) -> np.ndarray:
    """Moment matrix k * integral of P f_tau f K c c' over the kernel window.

    Univariate only.  Integrates t^(i+j) against the product of the model
    densities on [-1/2, 1/2], splitting at covariate-support edges so the
    density's jump does not defeat the quadrature; entries must reach
    absolute error 1e-8 or QuadratureError is raised.
    """
    if np.size(x) != 1:
        raise ValueError("m_matrix supports univariate models (d = 1) only")
    x = float(np.asarray(x).reshape(()))
    tau = float(tau)
    h = cfg.bandwidth
    p_dim = cfg.degree + 1
    lo, hi = model.support
    breaks = sorted(
        t for t in ((lo - x) / h, (hi - x) / h) if -0.5 < t < 0.5
    )

    def weight_at(t: float) -> float:
        xx = x + t * h
        return (
            float(model.class_prob(xx))
            * float(model.cond_density(tau, xx))
            * float(model.density(xx))
        )

    out = np.empty((p_dim, p_dim))
    for i in range(p_dim):
        for j in range(i, p_dim):
            val, err = integrate.quad(
                lambda t: weight_at(t) * t ** (i + j),
                -0.5,
                0.5,
                points=breaks if breaks else None,
                epsabs=1e-10,
                limit=200,
            )
            if err > 1e-8:
                raise QuadratureError(
                    f"moment entry ({i},{j}) reached abs error {err:.2e} > 1e-8"
                )
            out[i, j] = out[j, i] = cfg.outcome_class * val
    return out


def _minv_grid(grid: EvalGrid, cfg: FitConfig, model: TrueModel) -> np.ndarray:
    """Inverted moment matrices at every grid node, shape (n_x, n_tau, p, p)."""
    p_dim = cfg.degree + 1
    out = np.empty((grid.n_x, grid.n_tau, p_dim, p_dim))
    for ix, x in enumerate(grid.x_nodes):
        for it, tau in enumerate(grid.tau_nodes):
            out[ix, it] = np.linalg.inv(m_matrix(x, tau, cfg, model))
    return out


def _sup_remainder(
    sample: Sample,
    model: TrueModel,
    cfg: FitConfig,
    grid: EvalGrid,
    minv: np.ndarray,
    score_fn: Callable = psi_tilde,
) -> float:
    """Sup over grid nodes of the estimator's linear-representation error."""
    fits = fit_grid(sample, grid, cfg)
    h = cfg.bandwidth
    scale_h = h ** np.arange(cfg.degree + 1, dtype=np.float64)
    root = math.sqrt(sample.n * h)
    sup = 0.0
    # The first-order condition of the check-loss objective gives
    # sqrt(nh) H (gamma_hat - gamma) ~ -M^{-1} score for scores defined with
    # the leading minus sign, so the vanishing combination is lead + M^{-1}s.
    for ix, x in enumerate(grid.x_nodes):
        for it, tau in enumerate(grid.tau_nodes):
            gamma_true = np.asarray(model.gamma(tau, float(x), cfg.degree))
            lead = root * (fits.gamma[ix, it] - gamma_true) * scale_h
            vec = lead + minv[ix, it] @ score_fn(sample, x, tau, cfg, model)
            sup = max(sup, float(np.linalg.norm(vec)))
    return sup


def _bootstrap_remainders(
    sample: Sample,
    model: TrueModel,
    cfg: FitConfig,
    grid: EvalGrid,
    minv: np.ndarray,
    n_resamples: int,
    seed: int,
    stream: int,
) -> list[float]:
    """Sup-norm remainders of the bootstrap linear representation.

    Uses psi evaluated at the true gamma on each resample; its bootstrap
    expectation is exactly the same formula on the original sample, because
    every resampled row is uniform over the original rows.
    """
    base = fit_grid(sample, grid, cfg)
    responses, rows_x, origin = _expand_rows(sample, cfg.outcome_class)
    xcol = np.ascontiguousarray(rows_x[:, 0])
    h = cfg.bandwidth
    scale_h = h ** np.arange(cfg.degree + 1, dtype=np.float64)
    root = math.sqrt(sample.n * h)
    index_set = multi_indices(sample.d, cfg.degree)
    psi0 = np.empty((grid.n_x, grid.n_tau, cfg.degree + 1))
    deltas = np.empty((grid.n_x, grid.n_tau, len(responses)))
    for ix, x in enumerate(grid.x_nodes):
        offsets = rows_x - np.array([[float(x)]])
        for it, tau in enumerate(grid.tau_nodes):
            gamma_true = np.asarray(model.gamma(tau, float(x), cfg.degree))
            deltas[ix, it] = responses - basis_eval(index_set, offsets) @ gamma_true
            psi0[ix, it] = _weighted_score(
                rows_x, np.ones(len(responses)), deltas[ix, it], sample.n, x, tau, cfg
            )
    sups: list[float] = []
    for b in range(n_resamples):
        rng = substream(seed, stream, 1 + b)
        idx = rng.integers(0, sample.n, size=sample.n)
        mult = np.bincount(idx, minlength=sample.n).astype(np.float64)
        weights = mult[origin]
        gamma_star, _, status = _gamma_grid(responses, xcol, weights, grid, cfg)
        bad = np.argwhere(status != _OK)
        if bad.size:
            ix, it = bad[0]
            _raise_node_status(
                int(status[ix, it]),
                float(grid.x_nodes[ix]),
                float(grid.tau_nodes[it]),
                cfg.degree + 1,
            )
        sup = 0.0
        for ix, x in enumerate(grid.x_nodes):
            for it, tau in enumerate(grid.tau_nodes):
                psi_star = _weighted_score(
                    rows_x, weights, deltas[ix, it], sample.n, x, tau, cfg
                )
                lead = root * (gamma_star[ix, it] - base.gamma[ix, it]) * scale_h
                # Same sign convention as the full-sample remainder: the
                # score carries a leading minus, so the combination that
                # vanishes is lead + M^{-1}(score* - score).
                vec = lead + minv[ix, it] @ (psi_star - psi0[ix, it])
                sup = max(sup, float(np.linalg.norm(vec)))
        sups.append(sup)
    return sups


def _default_bandwidth(n: int) -> float:
    return float(n) ** (-1.0 / 5.0)


def remainder_study(
    model: TrueModel,
    sampler: Callable,
    n_values,
    cfg: FitConfig,
    grid: EvalGrid,
    replications: int = 20,
    seed: int = 0,
    bandwidth_rule: Callable | None = None,
    variants: tuple[str, ...] = ("theorem1",),
) -> RemainderReport:
    """Empirical sup-norm remainders across sample sizes.

    For each n (bandwidth h = n^(-1/5) unless overridden), the estimator
    variant draws fresh samples and measures the linear-representation
    error against M^{-1} psi_tilde; the bootstrap variant fixes one sample
    per n and measures the recentered bootstrap analogue over
    ``replications`` resamples.  The envelope column holds
    sqrt(log n) / (n^(1/4) h^(1/4)).
    """
    known = {"theorem1", "theorem2"}
    unknown = set(variants) - known
    if unknown:
        raise ValueError(f"unknown variants {sorted(unknown)}; choose from {sorted(known)}")
    if bandwidth_rule is None:
        bandwidth_rule = _default_bandwidth
    rows: list[RemainderRow] = []
    for ni, n in enumerate(int(v) for v in n_values):
        h = float(bandwidth_rule(n))
        cfg_n = replace(cfg, bandwidth=h)
        envelope = math.sqrt(math.log(n)) / (n**0.25 * h**0.25)
        minv = _minv_grid(grid, cfg_n, model)
        if "theorem1" in variants:
            for rep in range(replications):
                sample = sampler(n, substream(seed, ni, rep))
                sup = _sup_remainder(sample, model, cfg_n, grid, minv)
                rows.append(RemainderRow("theorem1", n, rep, sup, envelope))
        if "theorem2" in variants:
            base_stream = 2**20 + ni
            sample = sampler(n, substream(seed, base_stream, 0))
            sups = _bootstrap_remainders(
                sample, model, cfg_n, grid, minv, replications, seed, base_stream
            )
            for b, sup in enumerate(sups):
                rows.append(RemainderRow("theorem2", n, b, sup, envelope))
    return RemainderReport(rows=tuple(rows))


def _normal_quantile(tau: float) -> float:
    return float(stats.norm.ppf(tau))


def linear_gaussian() -> tuple[TrueModel, Callable]:
    """Y = X + 0.5 Z with X ~ Unif[0,1], Z ~ N(0,1): exactly linear quantiles.

    q(tau|x) = x + 0.5 z_tau, so a degree-1 local polynomial is exact and
    psi equals psi_tilde identically.
    """
    sd = 0.5

    def quantile(tau, x):
        return np.asarray(x, dtype=np.float64) + sd * _normal_quantile(tau)

    def gamma(tau, x, degree):
        g = np.zeros(degree + 1)
        g[0] = float(x) + sd * _normal_quantile(tau)
        g[1] = 1.0
        return g

    def density(x):
        x_arr = np.asarray(x, dtype=np.float64)
        return np.where((x_arr >= 0.0) & (x_arr <= 1.0), 1.0, 0.0)

    def cond_density(tau, x):
        base = float(stats.norm.pdf(_normal_quantile(tau))) / sd
        return np.full_like(np.asarray(x, dtype=np.float64), base)

    def class_prob(x):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def sampler(n, rng):
        x = rng.uniform(0.0, 1.0, n)
        y = x + sd * rng.normal(0.0, 1.0, n)
        return Sample.from_xy(y, x)

    model = TrueModel(
        name="linear_gaussian",
        quantile=quantile,
        gamma=gamma,
        density=density,
        cond_density=cond_density,
        class_prob=class_prob,
        support=(0.0, 1.0),
    )
    model.check()
    return model, sampler


def location_scale_gaussian() -> tuple[TrueModel, Callable]:
    """Y = X + (0.5 + 0.25 X) Z: heteroskedastic, still linear in x per tau.

    q(tau|x) = x + (0.5 + 0.25 x) z_tau has x-derivative 1 + 0.25 z_tau, so
    the quantile spread widens with x while degree-1 fits stay exact.
    """

    def scale(x):
        return 0.5 + 0.25 * np.asarray(x, dtype=np.float64)

    def quantile(tau, x):
        return np.asarray(x, dtype=np.float64) + scale(x) * _normal_quantile(tau)

    def gamma(tau, x, degree):
        z = _normal_quantile(tau)
        g = np.zeros(degree + 1)
        g[0] = float(x) + (0.5 + 0.25 * float(x)) * z
        g[1] = 1.0 + 0.25 * z
        return g

    def density(x):
        x_arr = np.asarray(x, dtype=np.float64)
        return np.where((x_arr >= 0.0) & (x_arr <= 1.0), 1.0, 0.0)

    def cond_density(tau, x):
        return float(stats.norm.pdf(_normal_quantile(tau))) / scale(x)

    def class_prob(x):
        return np.ones_like(np.asarray(x, dtype=np.float64))

    def sampler(n, rng):
        x = rng.uniform(0.0, 1.0, n)
        y = x + (0.5 + 0.25 * x) * rng.normal(0.0, 1.0, n)
        return Sample.from_xy(y, x)

    model = TrueModel(
        name="location_scale_gaussian",
        quantile=quantile,
        gamma=gamma,
        density=density,
        cond_density=cond_density,
        class_prob=class_prob,
        support=(0.0, 1.0),
    )
    model.check()
    return model, sampler


def model_bank() -> dict[str, Callable]:
    """Named constructors of (TrueModel, sampler) pairs."""
    return {
        "linear_gaussian": linear_gaussian,
        "location_scale_gaussian": location_scale_gaussian,
    }
