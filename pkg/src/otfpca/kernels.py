"""Compactly supported smoothing kernels on [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def _epanechnikov(x):
    return np.where(np.abs(x) <= 1.0, 0.75 * (1.0 - x * x), 0.0)


def _uniform(x):
    return np.where(np.abs(x) <= 1.0, 0.5, 0.0)


def _triweight(x):
    return np.where(np.abs(x) <= 1.0, 35.0 / 32.0 * (1.0 - x * x) ** 3, 0.0)


_KERNELS = {
    "epanechnikov": _epanechnikov,
    "uniform": _uniform,
    "triweight": _triweight,
}


@dataclass(frozen=True)
class KernelSpec:
    """A symmetric probability density supported on [-1, 1].

    ``KernelSpec("epanechnikov")(x, h)`` evaluates the scaled kernel
    ``K(x / h) / h``.
    """

    name: str = "epanechnikov"

    def __post_init__(self):
        if self.name not in _KERNELS:
            raise InvalidParameterError(
                f"unknown kernel {self.name!r}; choose from {sorted(_KERNELS)}"
            )

    def __call__(self, x, h: float) -> np.ndarray:
        if h <= 0:
            raise InvalidParameterError(f"bandwidth must be positive, got {h}")
        return _KERNELS[self.name](np.asarray(x, dtype=float) / h) / h


def as_kernel(kernel) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        return kernel
    return KernelSpec(kernel)
