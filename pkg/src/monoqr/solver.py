"""Exact minimization of weighted check-loss (pinball) objectives.

The weighted quantile regression objective sum_i w_i * l_tau(y_i - x_i'g) is
a linear program whose minimum is attained at a vertex interpolating p
observations.  The solver walks vertices with Bland's pivot rule from a fixed
initial basis (the leftmost linearly independent positively weighted rows),
so repeated calls return bit-identical minimizers and no smoothing or
iterative approximation error enters downstream diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateError, NonFiniteError, RankDeficientError
from .validation import as_float_array, check_tau

__all__ = ["WeightedQrProblem", "QrSolution", "check_loss", "score", "solve"]

# Statuses shared by the jitted kernels.
_OK = 0
_DEGENERATE = 1
_RANK_DEFICIENT = 2
_ITERATION_LIMIT = 3
_NUMERICAL = 4
_NO_SUPPORT = 5


@dataclass(frozen=True)
class WeightedQrProblem:
    """A weighted check-loss problem: responses, design rows, weights, tau."""

    responses: np.ndarray
    design: np.ndarray
    weights: np.ndarray
    tau: float

    def __post_init__(self) -> None:
        y = as_float_array(self.responses, "responses", ndim=1)
        X = as_float_array(self.design, "design", ndim=2)
        w = as_float_array(self.weights, "weights", ndim=1)
        if y.shape[0] != X.shape[0] or w.shape[0] != X.shape[0]:
            raise ValueError(
                f"inconsistent problem sizes: {y.shape[0]} responses, "
                f"{X.shape[0]} design rows, {w.shape[0]} weights"
            )
        if y.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("problem must have n >= 1 rows and p >= 1 columns")
        for name, arr in (("responses", y), ("design", X), ("weights", w)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteError(f"{name} contains NaN or infinite entries")
        if np.any(w < 0.0):
            raise ValueError("weights must be nonnegative")
        check_tau(self.tau)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class QrSolution:
    """Exact minimizer: coefficients, objective value and interpolated rows."""

    coefficients: np.ndarray
    objective: float
    active: np.ndarray = field(repr=False)


def check_loss(u, tau: float):
    """Check loss l_tau(u) = u * (tau - 1{u <= 0}); nonnegative, zero iff u = 0."""
    tau = check_tau(tau)
    u_arr = np.asarray(u, dtype=np.float64)
    out = u_arr * (tau - (u_arr <= 0.0))
    if np.isscalar(u) or u_arr.ndim == 0:
        return float(out)
    return out


def score(u, tau: float):
    """Check-loss score tau - 1{u <= 0}, with 1{u <= 0} = 1 at u = 0."""
    tau = check_tau(tau)
    u_arr = np.asarray(u, dtype=np.float64)
    out = tau - (u_arr <= 0.0).astype(np.float64)
    if np.isscalar(u) or u_arr.ndim == 0:
        return float(out)
    return out


@njit(cache=True)
def _invert(A, out):
    """Gauss-Jordan inverse with partial pivoting; returns False if singular."""
    p = A.shape[0]
    M = np.empty((p, 2 * p))
    for i in range(p):
        for j in range(p):
            M[i, j] = A[i, j]
            M[i, p + j] = 0.0
        M[i, p + i] = 1.0
    for col in range(p):
        best = col
        bv = abs(M[col, col])
        for i in range(col + 1, p):
            v = abs(M[i, col])
            if v > bv:
                bv = v
                best = i
        if bv == 0.0:
            return False
        if best != col:
            for j in range(2 * p):
                tmp = M[col, j]
                M[col, j] = M[best, j]
                M[best, j] = tmp
        inv = 1.0 / M[col, col]
        for j in range(2 * p):
            M[col, j] *= inv
        for i in range(p):
            if i != col:
                f = M[i, col]
                if f != 0.0:
                    for j in range(2 * p):
                        M[i, j] -= f * M[col, j]
    for i in range(p):
        for j in range(p):
            out[i, j] = M[i, p + j]
    return True


@njit(cache=True)
def _simplex(y, X, w, tau, max_iter):
    """Vertex walk for min_g sum_i w_i * l_tau(y_i - x_i'g), all w_i > 0.

    Returns (gamma, objective, active_rows, status, iterations).  The state
    is the active set A (p interpolated rows, kept sorted) plus, for each
    nonbasic row, a flag sigma recording which slack side is nominally basic;
    sigma is authoritative under degeneracy, not the recomputed residual
    sign.  Entering variables are scanned in Bland order (ascending row,
    positive side before negative side) and the leaving row is the smallest
    index among minimum-ratio blockers, which rules out cycling.
    """
    n, p = X.shape
    gamma = np.zeros(p)
    active = np.empty(p, dtype=np.int64)
    if n < p:
        return gamma, 0.0, active, _DEGENERATE, 0

    # Initial basis: leftmost independent rows by thresholded Gram-Schmidt.
    Q = np.empty((p, p))
    v = np.empty(p)
    nsel = 0
    for i in range(n):
        nrm0 = 0.0
        for j in range(p):
            v[j] = X[i, j]
            nrm0 += v[j] * v[j]
        nrm0 = np.sqrt(nrm0)
        if nrm0 <= 0.0:
            continue
        for _ in range(2):
            for k in range(nsel):
                dot = 0.0
                for j in range(p):
                    dot += v[j] * Q[k, j]
                for j in range(p):
                    v[j] -= dot * Q[k, j]
        nrm = 0.0
        for j in range(p):
            nrm += v[j] * v[j]
        nrm = np.sqrt(nrm)
        if nrm > 1e-12 * nrm0:
            for j in range(p):
                Q[nsel, j] = v[j] / nrm
            active[nsel] = i
            nsel += 1
            if nsel == p:
                break
    if nsel < p:
        return gamma, 0.0, active, _RANK_DEFICIENT, 0

    XA = np.empty((p, p))
    D = np.empty((p, p))
    yA = np.empty(p)
    r = np.empty(n)
    G = np.empty(p)
    s = np.empty(n)
    in_active = np.zeros(n, dtype=np.bool_)
    sigma = np.empty(n, dtype=np.int8)

    # Reduced-cost tolerance scaled to the problem's weight/design magnitude.
    wx = 0.0
    for i in range(n):
        rowmax = 0.0
        for j in range(p):
            a = abs(X[i, j])
            if a > rowmax:
                rowmax = a
        wx += w[i] * rowmax
    tol_rc = 1e-10 * max(1.0, wx)

    for a in range(p):
        ia = active[a]
        in_active[ia] = True
        yA[a] = y[ia]
        for j in range(p):
            XA[a, j] = X[ia, j]
    if not _invert(XA, D):
        return gamma, 0.0, active, _NUMERICAL, 0
    for j in range(p):
        acc = 0.0
        for a in range(p):
            acc += D[j, a] * yA[a]
        gamma[j] = acc
    for i in range(n):
        if in_active[i]:
            r[i] = 0.0
        else:
            acc = y[i]
            for j in range(p):
                acc -= X[i, j] * gamma[j]
            r[i] = acc
        sigma[i] = 1 if r[i] > 0.0 else (-1 if r[i] < 0.0 else 1)

    status = _ITERATION_LIMIT
    iters = 0
    while iters < max_iter:
        iters += 1

        for j in range(p):
            G[j] = 0.0
        for i in range(n):
            if not in_active[i]:
                psi = tau if sigma[i] == 1 else tau - 1.0
                wpsi = w[i] * psi
                for j in range(p):
                    G[j] += wpsi * X[i, j]

        enter_pos = -1
        enter_side = 0.0
        for a in range(p):
            ia = active[a]
            gd = 0.0
            for j in range(p):
                gd += G[j] * D[j, a]
            if w[ia] * tau + gd < -tol_rc:
                enter_pos = a
                enter_side = 1.0
                break
            if w[ia] * (1.0 - tau) - gd < -tol_rc:
                enter_pos = a
                enter_side = -1.0
                break
        if enter_pos < 0:
            status = _OK
            break

        # Ratio test along the chosen edge: residuals move by enter_side*t*s_i.
        # Rows whose rate s_i cancels to rounding noise (relative to the
        # absolute sum of its terms) must not block, or a row dependent on
        # the current basis could enter and make X_A singular.
        leave = -1
        t_best = np.inf
        for i in range(n):
            if in_active[i]:
                continue
            acc = 0.0
            sabs = 0.0
            for j in range(p):
                term = X[i, j] * D[j, enter_pos]
                acc += term
                sabs += abs(term)
            if abs(acc) <= 1e-12 * sabs:
                continue
            es = enter_side * acc
            if sigma[i] * es < 0.0:
                t = -r[i] / es
                if t < 0.0:
                    t = 0.0
                if t < t_best:
                    t_best = t
                    leave = i
        if leave < 0:
            status = _NUMERICAL
            break

        old = active[enter_pos]
        in_active[old] = False
        sigma[old] = 1 if enter_side > 0.0 else -1
        in_active[leave] = True

        # Reinsert keeping the active set sorted ascending.
        pos = enter_pos
        while pos > 0 and active[pos - 1] > leave:
            active[pos] = active[pos - 1]
            pos -= 1
        while pos < p - 1 and active[pos + 1] < leave:
            active[pos] = active[pos + 1]
            pos += 1
        active[pos] = leave

        for a in range(p):
            ia = active[a]
            yA[a] = y[ia]
            for j in range(p):
                XA[a, j] = X[ia, j]
        if not _invert(XA, D):
            status = _NUMERICAL
            break
        for j in range(p):
            acc = 0.0
            for a in range(p):
                acc += D[j, a] * yA[a]
            gamma[j] = acc
        for i in range(n):
            if in_active[i]:
                r[i] = 0.0
            else:
                acc = y[i]
                for j in range(p):
                    acc -= X[i, j] * gamma[j]
                r[i] = acc

    obj = 0.0
    for i in range(n):
        u = r[i]
        if u <= 0.0:
            obj += w[i] * u * (tau - 1.0)
        else:
            obj += w[i] * u * tau
    return gamma, obj, active, status, iters


def _raise_for_status(status: int, p: int) -> None:
    if status == _DEGENERATE or status == _NO_SUPPORT:
        raise DegenerateError(f"fewer than p={p} positively weighted rows")
    if status == _RANK_DEFICIENT:
        raise RankDeficientError("positively weighted design rows do not span R^p")
    if status == _ITERATION_LIMIT:
        raise RuntimeError("pivot iteration limit exceeded")
    if status == _NUMERICAL:
        raise RuntimeError("numerical failure in the simplex walk")


def solve(problem: WeightedQrProblem) -> QrSolution:
    """Return the exact global minimizer of the weighted check-loss objective.

    Rows with zero weight never influence the result.  Raises
    DegenerateError when fewer than p rows have positive weight,
    RankDeficientError when those rows do not span R^p, and NonFiniteError
    for NaN or infinite inputs (via WeightedQrProblem validation).
    """
    w = problem.weights
    pos = w > 0.0
    n_pos = int(np.count_nonzero(pos))
    p = problem.p
    if n_pos < p:
        raise DegenerateError(
            f"only {n_pos} positively weighted rows for p={p} coefficients"
        )
    idx = np.flatnonzero(pos)
    y = np.ascontiguousarray(problem.responses[idx])
    X = np.ascontiguousarray(problem.design[idx])
    ww = np.ascontiguousarray(w[idx])
    max_iter = 1000 + 50 * n_pos
    gamma, obj, active_sub, status, _ = _simplex(y, X, ww, problem.tau, max_iter)
    _raise_for_status(status, p)
    active = np.sort(idx[active_sub])
    return QrSolution(coefficients=gamma, objective=float(obj), active=active)
