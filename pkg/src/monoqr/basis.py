"""Polynomial multi-index basis, kernel evaluation and bandwidth scaling.

These are the shared ingredients of every local fit: the graded ordering of
the multi-index set fixes which coefficient slot holds which derivative, the
kernel defines the observation window, and the scale matrix converts between
the scaled coordinates used by the solver and raw derivative units.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .validation import as_float_array, check_positive

__all__ = [
    "MultiIndexSet",
    "Kernel",
    "ScaleMatrix",
    "multi_indices",
    "basis_eval",
    "kernel_eval",
    "scale_matrix",
]


@dataclass(frozen=True)
class MultiIndexSet:
    """All d-dimensional multi-indices u with [u] = u1 + ... + ud <= r.

    The ordering is graded lexicographic: indices are sorted by total degree
    first, then lexicographically in descending coordinate order within each
    degree, so position 0 is always the intercept and, for d = 1, position 1
    is the first-derivative slot.
    """

    d: int
    r: int
    indices: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def degrees(self) -> np.ndarray:
        """Total degree [u] of each multi-index, in set order."""
        return np.array([sum(u) for u in self.indices], dtype=np.int64)


class Kernel(enum.Enum):
    """Built-in kernel functions; only the uniform kernel ships for now."""

    UNIFORM = "uniform"

    @property
    def support_radius(self) -> float:
        return 0.5


@dataclass(frozen=True)
class ScaleMatrix:
    """Diagonal matrix diag((h^[u])_u) in the multi-index set's order."""

    h: float
    diagonal: np.ndarray

    @property
    def inverse_diagonal(self) -> np.ndarray:
        return 1.0 / self.diagonal


def multi_indices(d: int, r: int) -> MultiIndexSet:
    """Enumerate the multi-index set for dimension ``d`` and degree ``r``.

    Both arguments must be at least 1; the resulting set has exactly
    C(d + r, r) elements.
    """
    d = int(d)
    r = int(r)
    if d < 1:
        raise ValueError(f"dimension d must be >= 1, got {d}")
    if r < 1:
        raise ValueError(f"degree r must be >= 1, got {r}")
    all_indices = [u for u in product(range(r + 1), repeat=d) if sum(u) <= r]
    all_indices.sort(key=lambda u: (sum(u), tuple(-ui for ui in u)))
    out = MultiIndexSet(d=d, r=r, indices=tuple(all_indices))
    assert len(out) == math.comb(d + r, r)
    return out


def basis_eval(index_set: MultiIndexSet, z) -> np.ndarray:
    """Evaluate c(z) = (z^u)_u at one point (d,) or a batch of points (m, d).

    Returns a vector of length ``len(index_set)`` for a single point and an
    (m, len(index_set)) matrix for a batch.
    """
    z = as_float_array(z, "z")
    single = z.ndim <= 1
    pts = np.atleast_2d(z)
    if pts.shape[1] != index_set.d:
        if index_set.d == 1 and pts.shape[0] == 1:
            pts = pts.reshape(-1, 1)
        else:
            raise ValueError(
                f"point dimension {pts.shape[1]} does not match index set d={index_set.d}"
            )
    m = pts.shape[0]
    out = np.empty((m, len(index_set)), dtype=np.float64)
    powers = [
        np.vander(pts[:, j], N=index_set.r + 1, increasing=True) for j in range(index_set.d)
    ]
    for col, u in enumerate(index_set.indices):
        acc = np.ones(m, dtype=np.float64)
        for j, uj in enumerate(u):
            if uj:
                acc = acc * powers[j][:, uj]
        out[:, col] = acc
    if single:
        return out[0]
    return out


def kernel_eval(kernel: Kernel, t) -> np.ndarray | float:
    """Evaluate the kernel at one point (d,) or a batch (m, d).

    The uniform kernel takes the value 1 on the closed box [-1/2, 1/2]^d,
    boundary included, and 0 outside.
    """
    if kernel is not Kernel.UNIFORM:
        raise ValueError(f"unsupported kernel: {kernel!r}")
    t = as_float_array(t, "t")
    single = t.ndim <= 1
    pts = t.reshape(1, -1) if single else t
    inside = np.all(np.abs(pts) <= kernel.support_radius, axis=1).astype(np.float64)
    return float(inside[0]) if single else inside


def scale_matrix(index_set: MultiIndexSet, h: float) -> ScaleMatrix:
    """Diagonal (h^[u])_u used to move between scaled and derivative units."""
    h = check_positive(h, "bandwidth h")
    diag = np.power(h, index_set.degrees.astype(np.float64))
    return ScaleMatrix(h=h, diagonal=diag)
