"""Odd bijections from the real line onto (-1, 1) linking Z to the multiplier U."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


def _arctan(x):
    return 2.0 / np.pi * np.arctan(x)


def _arctan_inv(y):
    return np.tan(0.5 * np.pi * y)


def _algebraic(x):
    # (sqrt(1 + 4x^2) - 1) / (2x) rewritten without cancellation; equals 0 at x = 0
    return 2.0 * x / (1.0 + np.sqrt(1.0 + 4.0 * x * x))


def _algebraic_inv(y):
    return y / (1.0 - y * y)


def _logistic(x):
    return np.tanh(0.5 * x)


def _logistic_inv(y):
    return 2.0 * np.arctanh(y)


_LINKS = {
    "arctan": (_arctan, _arctan_inv),
    "algebraic": (_algebraic, _algebraic_inv),
    "logistic": (_logistic, _logistic_inv),
}


@dataclass(frozen=True)
class LinkFunction:
    """Link ``g`` with ``U = g(Z)``.

    Variants: ``"arctan"`` is ``2 arctan(x) / pi``, ``"algebraic"`` is
    ``(sqrt(1 + 4x^2) - 1) / (2x)`` and ``"logistic"`` is ``(e^x - 1) / (e^x + 1)``.
    """

    variant: str = "arctan"

    def __post_init__(self):
        if self.variant not in _LINKS:
            raise InvalidParameterError(
                f"unknown link {self.variant!r}; choose from {sorted(_LINKS)}"
            )

    def forward(self, x):
        return _LINKS[self.variant][0](np.asarray(x, dtype=float))

    def inverse(self, y):
        return _LINKS[self.variant][1](np.asarray(y, dtype=float))

    __call__ = forward


def as_link(link) -> LinkFunction:
    if isinstance(link, LinkFunction):
        return link
    return LinkFunction(link)
