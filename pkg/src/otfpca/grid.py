"""Grid-valued representations of measures and transport maps on [0, 1].

Both types store function values on the equispaced grid ``j / (M - 1)``.
A :class:`GridMeasure` stores a quantile function, a :class:`TransportMap`
stores a non-decreasing map of the unit interval onto itself.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DomainError, IncompatibleGridError, InvalidInputError

# Rounding slack accepted by the constructors before values are repaired.
_TOL = 1e-9


@lru_cache(maxsize=64)
def _cached_grid(size: int) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, size)
    grid.setflags(write=False)
    return grid


@lru_cache(maxsize=64)
def _cached_weights(size: int) -> np.ndarray:
    w = np.full(size, 1.0 / (size - 1))
    w[0] *= 0.5
    w[-1] *= 0.5
    w.setflags(write=False)
    return w


def unit_grid(size: int) -> np.ndarray:
    """Equispaced grid ``j / (size - 1)`` on [0, 1] (read-only, cached)."""
    if size < 2:
        raise InvalidInputError(f"grid size must be at least 2, got {size}")
    return _cached_grid(int(size))


def trapezoid_weights(size: int) -> np.ndarray:
    """Quadrature weights of the trapezoidal rule on ``unit_grid(size)`` (read-only, cached)."""
    if size < 2:
        raise InvalidInputError(f"grid size must be at least 2, got {size}")
    return _cached_weights(int(size))


def integrate(values: np.ndarray) -> float:
    """Trapezoidal integral over [0, 1] of values on the unit grid (last axis)."""
    values = np.asarray(values, dtype=float)
    return values @ trapezoid_weights(values.shape[-1])


def generalized_inverse(values: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Left-continuous inverse of a non-decreasing piecewise-linear function.

    ``values`` holds the function on ``unit_grid(len(values))``. For each query
    level ``y`` this returns ``inf{v : f(v) >= y}``, interpolating linearly on
    strictly increasing segments. Queries below ``f(0)`` map to 0 and queries
    above ``f(1)`` map to 1.
    """
    values = np.asarray(values, dtype=float)
    query = np.asarray(query, dtype=float)
    grid = unit_grid(values.size)
    idx = np.searchsorted(values, query, side="left")
    out = np.empty_like(query)
    low = idx == 0
    high = idx >= values.size
    out[low] = 0.0
    out[high] = 1.0
    mid = ~(low | high)
    j = idx[mid]
    v0 = values[j - 1]
    v1 = values[j]
    frac = (query[mid] - v0) / (v1 - v0)
    out[mid] = grid[j - 1] + frac * (grid[j] - grid[j - 1])
    return out


def _clean_monotone(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidInputError(f"{name} must be a 1-D array with at least 2 entries")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    if np.any(np.diff(arr) < -_TOL):
        bad = int(np.argmax(np.diff(arr) < -_TOL))
        raise InvalidInputError(f"{name} must be non-decreasing (violated at index {bad + 1})")
    if arr.min() < -_TOL or arr.max() > 1.0 + _TOL:
        raise DomainError(f"{name} must lie in [0, 1]")
    arr = np.maximum.accumulate(np.clip(arr, 0.0, 1.0))
    arr.setflags(write=False)
    return arr


class GridMeasure:
    """Probability measure on [0, 1] stored as its quantile function.

    Parameters
    ----------
    qvals : array_like
        Quantile values at the levels ``j / (M - 1)``. Must be non-decreasing
        and inside [0, 1].
    """

    __slots__ = ("qvals",)

    def __init__(self, qvals):
        self.qvals = _clean_monotone(qvals, "qvals")

    @property
    def grid_size(self) -> int:
        return self.qvals.size

    @property
    def levels(self) -> np.ndarray:
        return unit_grid(self.grid_size)

    @classmethod
    def uniform(cls, size: int = 101) -> "GridMeasure":
        return cls(unit_grid(size))

    def cdf(self, x) -> np.ndarray:
        """Interpolated distribution function, via the generalized inverse."""
        return generalized_inverse(self.qvals, np.atleast_1d(x))

    def __eq__(self, other):
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return np.array_equal(self.qvals, other.qvals)

    def __hash__(self):
        return hash(self.qvals.tobytes())

    def __repr__(self):
        return f"GridMeasure(grid_size={self.grid_size})"


class TransportMap:
    """Non-decreasing map of [0, 1] onto itself with ``T(0) = 0`` and ``T(1) = 1``.

    Endpoints within rounding slack of 0 and 1 are pinned exactly.
    """

    __slots__ = ("tvals",)

    def __init__(self, tvals):
        arr = np.array(tvals, dtype=float)
        if arr.ndim == 1 and arr.size >= 2:
            if abs(arr[0]) > _TOL or abs(arr[-1] - 1.0) > _TOL:
                raise InvalidInputError("transport maps must satisfy T(0) = 0 and T(1) = 1")
            arr[0], arr[-1] = 0.0, 1.0
        self.tvals = _clean_monotone(arr, "tvals")

    @property
    def grid_size(self) -> int:
        return self.tvals.size

    @property
    def grid(self) -> np.ndarray:
        return unit_grid(self.grid_size)

    @classmethod
    def identity(cls, size: int = 101) -> "TransportMap":
        return cls(unit_grid(size))

    @classmethod
    def from_function(cls, func, size: int = 101) -> "TransportMap":
        return cls(func(unit_grid(size)))

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.grid, self.tvals)

    def displacement(self) -> np.ndarray:
        """``T(u) - u`` on the grid."""
        return self.tvals - self.grid

    def __eq__(self, other):
        if not isinstance(other, TransportMap):
            return NotImplemented
        return np.array_equal(self.tvals, other.tvals)

    def __hash__(self):
        return hash(self.tvals.tobytes())

    def __repr__(self):
        return f"TransportMap(grid_size={self.grid_size})"


def check_same_grid(*objs) -> int:
    sizes = {o.grid_size for o in objs}
    if len(sizes) != 1:
        raise IncompatibleGridError(f"grid sizes differ: {sorted(sizes)}")
    return sizes.pop()
