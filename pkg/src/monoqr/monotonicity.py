"""One-sided tests of quantile-derivative sign restrictions.

The statistic integrates Lambda_p(signed derivative estimate) over a finite
(x, tau) grid with positive weights; its bootstrap critical value is the
empirical (1 - alpha) quantile of recentered draws, floored at
h^{1/2} * eta + mean(draws) to guard against a degenerate bootstrap
distribution.  Both the one-quantile statistic and the interquartile-spread
variant (difference of derivatives at two quantile levels) are supported.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingNodeError
from .estimator import GridFits
from .grids import EvalGrid
from .validation import as_float_array, check_alpha, check_positive, check_tau

__all__ = [
    "Direction",
    "Variant",
    "TestSpec",
    "TestOutcome",
    "lambda_p",
    "statistic",
    "statistic_from_matrix",
    "decide",
]


class Direction(enum.Enum):
    """Sign restriction under the null hypothesis on the derivative g."""

    NON_POSITIVE = "non-positive"
    NON_NEGATIVE = "non-negative"

    @property
    def sign(self) -> float:
        """Multiplier s making the integrand Lambda_p(s * g); violations of
        the null push s * g above zero for either direction."""
        return 1.0 if self is Direction.NON_POSITIVE else -1.0


class Variant(enum.Enum):
    """Which derivative functional enters the statistic."""

    SINGLE_DERIVATIVE = "single"
    INTERQUARTILE_DELTA = "interquartile"


@dataclass(frozen=True)
class TestSpec:
    """Statistic shape: exponent, null direction and functional variant."""

    __test__ = False  # not a pytest class despite the name

    p: float = 2.0
    direction: Direction = Direction.NON_POSITIVE
    variant: Variant = Variant.SINGLE_DERIVATIVE
    tau_pair: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not float(self.p) >= 1.0:
            raise ValueError(f"exponent p must be >= 1, got {self.p}")
        object.__setattr__(self, "p", float(self.p))
        if not isinstance(self.direction, Direction):
            raise TypeError("direction must be a Direction")
        if not isinstance(self.variant, Variant):
            raise TypeError("variant must be a Variant")
        if self.variant is Variant.INTERQUARTILE_DELTA:
            if self.tau_pair is None or len(self.tau_pair) != 2:
                raise ValueError("interquartile variant requires tau_pair=(tau1, tau2)")
            t1, t2 = (float(t) for t in self.tau_pair)
            check_tau(t1)
            check_tau(t2)
            if not t1 < t2:
                raise ValueError(f"tau_pair must satisfy tau1 < tau2, got {self.tau_pair}")
            object.__setattr__(self, "tau_pair", (t1, t2))
        elif self.tau_pair is not None:
            raise ValueError("tau_pair is only meaningful for the interquartile variant")


@dataclass(frozen=True)
class TestOutcome:
    """Decision record: statistic, bootstrap summary and rejection verdict."""

    __test__ = False  # not a pytest class despite the name

    statistic: float
    draws: np.ndarray = field(repr=False)
    c_alpha: float
    a_hat_star: float
    critical_value: float
    reject: bool
    alpha: float
    eta: float
    h: float

    def __post_init__(self) -> None:
        floor = math.sqrt(self.h) * self.eta + self.a_hat_star
        if self.critical_value + 1e-12 < self.c_alpha:
            raise ValueError("critical value must be at least c_alpha")
        if self.critical_value + 1e-12 < floor:
            raise ValueError("critical value must be at least h^(1/2)*eta + a_hat_star")
        if self.reject != (self.statistic > self.critical_value):
            raise ValueError("reject flag inconsistent with the strict decision rule")

    def to_dict(self) -> dict:
        """JSON-ready mapping of every field, draws included."""
        return {
            "statistic": self.statistic,
            "c_alpha": self.c_alpha,
            "a_hat_star": self.a_hat_star,
            "critical_value": self.critical_value,
            "reject": bool(self.reject),
            "alpha": self.alpha,
            "eta": self.eta,
            "h": self.h,
            "draws": [float(v) for v in self.draws],
        }

    def verdict(self) -> str:
        """One-line human-readable summary of the decision."""
        word = "reject" if self.reject else "fail to reject"
        return (
            f"{word} H0 at level {self.alpha:g}: statistic {self.statistic:.6g} "
            f"vs critical value {self.critical_value:.6g}"
        )


def lambda_p(a, p: float):
    """One-sided power Lambda_p(a) = (max(a, 0))^p for exponent p >= 1."""
    if not float(p) >= 1.0:
        raise ValueError(f"exponent p must be >= 1, got {p}")
    a_arr = np.asarray(a, dtype=np.float64)
    out = np.maximum(a_arr, 0.0) ** float(p)
    if np.isscalar(a) or a_arr.ndim == 0:
        return float(out)
    return out


def statistic_from_matrix(ghat: np.ndarray, grid: EvalGrid, spec: TestSpec) -> float:
    """Weighted-grid statistic from a dense (n_x, n_tau) derivative matrix.

    Used both for the sample statistic and, applied to ghat_star - ghat, for
    the recentered bootstrap draws.
    """
    ghat = as_float_array(ghat, "ghat", ndim=2)
    if ghat.shape != (grid.n_x, grid.n_tau):
        raise ValueError(
            f"derivative matrix shape {ghat.shape} does not match the "
            f"({grid.n_x}, {grid.n_tau}) grid"
        )
    s = spec.direction.sign
    if spec.variant is Variant.SINGLE_DERIVATIVE:
        vals = lambda_p(s * ghat, spec.p)
        return float(grid.x_weights @ vals @ grid.tau_weights)
    t1, t2 = spec.tau_pair
    i1 = grid.tau_index(t1)
    i2 = grid.tau_index(t2)
    if i1 < 0 or i2 < 0:
        missing = t1 if i1 < 0 else t2
        raise MissingNodeError(f"tau node {missing:g} is not on the grid")
    diff = ghat[:, i2] - ghat[:, i1]
    return float(grid.x_weights @ lambda_p(s * diff, spec.p))


def _subgrid_indices(values: np.ndarray, wanted: np.ndarray, what: str) -> np.ndarray:
    out = np.empty(wanted.shape[0], dtype=np.int64)
    for i, v in enumerate(wanted):
        hits = np.flatnonzero(np.isclose(values, v, rtol=0.0, atol=1e-12))
        if hits.size == 0:
            raise MissingNodeError(f"{what} node {v:g} has no fitted value")
        out[i] = hits[0]
    return out


def statistic(fits: GridFits, spec: TestSpec, grid: EvalGrid | None = None) -> float:
    """Test statistic over a grid covered by the fits.

    With ``grid`` omitted the fit's own grid (nodes and weights) is used;
    an explicit grid must have every node present among the fitted nodes.
    """
    if grid is None or grid is fits.grid:
        return statistic_from_matrix(fits.ghat, fits.grid, spec)
    ix = _subgrid_indices(fits.grid.x_nodes, grid.x_nodes, "x")
    it = _subgrid_indices(fits.grid.tau_nodes, grid.tau_nodes, "tau")
    return statistic_from_matrix(fits.ghat[np.ix_(ix, it)], grid, spec)


def decide(
    statistic: float,
    draws,
    alpha: float,
    eta: float = 1e-3,
    h: float = 1.0,
) -> TestOutcome:
    """Bootstrap decision: reject iff statistic > max(c_alpha, h^(1/2)*eta + mean).

    c_alpha is the ceil((1 - alpha) * B)-th order statistic (1-based) of the
    B draws; the index is computed as B - floor(alpha * B) with a small
    rounding guard so that alpha * B landing on an integer resolves exactly.
    """
    draws_arr = as_float_array(draws, "draws", ndim=1)
    if draws_arr.shape[0] == 0:
        raise ValueError("bootstrap draws must be nonempty")
    check_alpha(alpha)
    if not float(eta) >= 0.0:
        raise ValueError(f"eta must be nonnegative, got {eta}")
    check_positive(h, "h")
    b = draws_arr.shape[0]
    k = b - math.floor(alpha * b + 1e-9)
    k = min(max(k, 1), b)
    ordered = np.sort(draws_arr)
    c_alpha = float(ordered[k - 1])
    a_hat_star = float(np.mean(draws_arr))
    critical = max(c_alpha, math.sqrt(h) * float(eta) + a_hat_star)
    stat = float(statistic)
    return TestOutcome(
        statistic=stat,
        draws=draws_arr,
        c_alpha=c_alpha,
        a_hat_star=a_hat_star,
        critical_value=critical,
        reject=bool(stat > critical),
        alpha=float(alpha),
        eta=float(eta),
        h=float(h),
    )
