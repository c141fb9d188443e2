"""Exception types raised by the estimation, testing and simulation code."""

from __future__ import annotations


class MonoqrError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteError(MonoqrError, ValueError):
    """An input array contains NaN or infinite entries."""


class DegenerateError(MonoqrError):
    """Fewer positively weighted observations than regression coefficients."""


class RankDeficientError(MonoqrError):
    """The positively weighted design rows do not span the coefficient space."""


class InsufficientSupportError(MonoqrError):
    """A kernel window contains too few observations to identify the local fit."""


class MissingNodeError(MonoqrError):
    """A grid node required by the test statistic has no fitted value."""


class ResampleFitFailure(MonoqrError):
    """A bootstrap refit failed at some grid node.

    Attributes
    ----------
    resample : int
        Index of the offending bootstrap resample.
    node : tuple
        The (x, tau) grid node at which the refit failed.
    """

    def __init__(self, resample: int, node: tuple, message: str = "") -> None:
        self.resample = resample
        self.node = node
        detail = message or "bootstrap refit failed"
        super().__init__(f"{detail} (resample {resample}, node {node})")


class QuadratureError(MonoqrError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ParseError(MonoqrError):
    """Malformed input data file."""


class ConfigError(MonoqrError):
    """Invalid or inconsistent run configuration."""
