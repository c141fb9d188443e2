"""Evaluation grids over (x, tau) with integration weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_array, check_finite

__all__ = ["EvalGrid", "make_grid"]


@dataclass(frozen=True)
class EvalGrid:
    """Finite grids over x and tau with positive integration weights.

    The x weights already include any weight function w_tau(x), so the test
    statistic is a plain weighted sum over nodes.
    """

    x_nodes: np.ndarray
    x_weights: np.ndarray
    tau_nodes: np.ndarray
    tau_weights: np.ndarray

    def __post_init__(self) -> None:
        xn = check_finite(as_float_array(self.x_nodes, "x_nodes", ndim=1), "x_nodes")
        xw = check_finite(as_float_array(self.x_weights, "x_weights", ndim=1), "x_weights")
        tn = check_finite(as_float_array(self.tau_nodes, "tau_nodes", ndim=1), "tau_nodes")
        tw = check_finite(as_float_array(self.tau_weights, "tau_weights", ndim=1), "tau_weights")
        if xn.shape[0] == 0 or tn.shape[0] == 0:
            raise ValueError("grid must have at least one x node and one tau node")
        if xn.shape != xw.shape or tn.shape != tw.shape:
            raise ValueError("grid nodes and weights must have matching lengths")
        if np.any(np.diff(xn) <= 0.0):
            raise ValueError("x nodes must be strictly increasing")
        if np.any(np.diff(tn) <= 0.0):
            raise ValueError("tau nodes must be strictly increasing")
        if np.any(tn <= 0.0) or np.any(tn >= 1.0):
            raise ValueError("tau nodes must lie in (0, 1)")
        if np.any(xw <= 0.0) or np.any(tw <= 0.0):
            raise ValueError("grid weights must be positive")
        object.__setattr__(self, "x_nodes", xn)
        object.__setattr__(self, "x_weights", xw)
        object.__setattr__(self, "tau_nodes", tn)
        object.__setattr__(self, "tau_weights", tw)

    @property
    def n_x(self) -> int:
        return self.x_nodes.shape[0]

    @property
    def n_tau(self) -> int:
        return self.tau_nodes.shape[0]

    def tau_index(self, tau: float) -> int:
        """Position of ``tau`` among the tau nodes, or -1 when absent."""
        hits = np.flatnonzero(np.isclose(self.tau_nodes, tau, rtol=0.0, atol=1e-12))
        return int(hits[0]) if hits.size else -1


def make_grid(
    x_min: float = 0.05,
    x_max: float = 0.95,
    n_x: int = 19,
    taus=(0.5,),
    tau_weights=None,
) -> EvalGrid:
    """Equally spaced x grid carrying midpoint-rule weights (b - a) / n_x.

    With the defaults this is the 19-node grid on [0.05, 0.95] whose weights
    sum to 0.9, the measure of the x domain.  A singleton tau grid gets unit
    weight; explicit tau weights may be supplied for multi-tau integration.
    """
    if n_x < 1:
        raise ValueError(f"n_x must be >= 1, got {n_x}")
    if x_max < x_min:
        raise ValueError("x_max must be >= x_min")
    if n_x == 1:
        x_nodes = np.array([0.5 * (x_min + x_max)])
    else:
        x_nodes = np.linspace(x_min, x_max, n_x)
    measure = x_max - x_min if x_max > x_min else 1.0
    x_weights = np.full(n_x, measure / n_x)
    taus = np.atleast_1d(np.asarray(taus, dtype=np.float64))
    if tau_weights is None:
        tau_w = np.ones_like(taus)
    else:
        tau_w = np.atleast_1d(np.asarray(tau_weights, dtype=np.float64))
    return EvalGrid(x_nodes=x_nodes, x_weights=x_weights, tau_nodes=taus, tau_weights=tau_w)
