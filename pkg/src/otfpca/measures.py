"""Quantile-function arithmetic for univariate measures on [0, 1]."""

from __future__ import annotations

import numpy as np

from .errors import DomainError, InvalidInputError, InvalidParameterError
from .grid import GridMeasure, TransportMap, check_same_grid, integrate, unit_grid

__all__ = [
    "empirical_quantile",
    "wasserstein_distance",
    "push_forward",
    "measure_to_transport",
    "transport_to_measure",
]


def empirical_quantile(samples, M: int = 101) -> GridMeasure:
    """Interpolated empirical quantile function of ``samples`` on ``M`` levels.

    Order statistics are placed at plotting positions ``(k - 1) / (m - 1)`` and
    joined linearly, so the sample minimum and maximum are reproduced exactly.
    A single sample gives a constant quantile function.

    Parameters
    ----------
    samples : array_like
        Observations in [0, 1].
    M : int
        Number of probability levels.

    Returns
    -------
    GridMeasure
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise InvalidInputError("empirical_quantile needs at least one sample")
    if M < 2:
        raise InvalidParameterError(f"grid size M must be >= 2, got {M}")
    if not np.all(np.isfinite(x)) or x[0] < 0.0 or x[-1] > 1.0:
        raise DomainError("samples must lie in [0, 1]")
    levels = unit_grid(M)
    if x.size == 1:
        return GridMeasure(np.full(M, x[0]))
    positions = np.linspace(0.0, 1.0, x.size)
    return GridMeasure(np.interp(levels, positions, x))


def _lp_distance(a: np.ndarray, b: np.ndarray, p: float) -> float:
    if p < 1:
        raise InvalidParameterError(f"Wasserstein order p must be >= 1, got {p}")
    diff = np.abs(a - b)
    if p == 1:
        return float(integrate(diff))
    return float(integrate(diff**p) ** (1.0 / p))


def wasserstein_distance(a: GridMeasure, b: GridMeasure, p: float = 2) -> float:
    """p-Wasserstein distance, the L^p distance between quantile functions."""
    check_same_grid(a, b)
    return _lp_distance(a.qvals, b.qvals, p)


def push_forward(T: TransportMap, a: GridMeasure) -> GridMeasure:
    """Image measure ``T # a``; its quantile function is ``T o F_a^{-1}``."""
    check_same_grid(T, a)
    return GridMeasure(T(a.qvals))


def measure_to_transport(a: GridMeasure) -> TransportMap:
    """Transport from the uniform law to ``a``, with endpoints pinned to 0 and 1."""
    tvals = np.array(a.qvals)
    tvals[0], tvals[-1] = 0.0, 1.0
    return TransportMap(tvals)


def transport_to_measure(T: TransportMap) -> GridMeasure:
    """Push the uniform law forward through ``T``."""
    return GridMeasure(T.tvals)
