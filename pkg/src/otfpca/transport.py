"""Algebra on the transport space: scalar multiplication, inverses, signs and norms."""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DegenerateSourceWarning, InvalidParameterError
from .grid import GridMeasure, TransportMap, check_same_grid, generalized_inverse, integrate, unit_grid
from .measures import _lp_distance

__all__ = [
    "optimal_transport",
    "scalar_mult",
    "invert",
    "sign",
    "norm1",
    "transport_distance",
    "geodesic",
    "equiv_class_distance",
    "golden_section",
]


def optimal_transport(source: GridMeasure, target: GridMeasure) -> TransportMap:
    """Monotone optimal transport ``F_target^{-1} o F_source`` on the argument grid.

    A flat stretch in the source quantile function (an atom) triggers a
    :class:`DegenerateSourceWarning`; the left-continuous inverse is used.
    """
    M = check_same_grid(source, target)
    if np.any(np.diff(source.qvals[1:-1]) == 0.0):
        warnings.warn(
            "source quantile function has a flat plateau; using the generalized inverse",
            DegenerateSourceWarning,
            stacklevel=2,
        )
    grid = unit_grid(M)
    levels = generalized_inverse(source.qvals, grid)
    tvals = np.interp(levels, grid, target.qvals)
    tvals[0], tvals[-1] = 0.0, 1.0
    return TransportMap(tvals)


def invert(T: TransportMap) -> TransportMap:
    """Generalized inverse ``inf{v : T(v) >= u}`` evaluated on the grid.

    The endpoints are pinned to 0 and 1, so a plateau of ``T`` at 1 still
    gives a map of [0, 1] onto itself.
    """
    vals = generalized_inverse(T.tvals, T.grid)
    vals[0], vals[-1] = 0.0, 1.0
    return TransportMap(vals)


def scalar_mult(alpha: float, T: TransportMap) -> TransportMap:
    """Scale ``T`` along its geodesic through the identity.

    Positive ``alpha`` shrinks the displacement towards the identity, negative
    ``alpha`` does the same with ``T^{-1}``.
    """
    alpha = float(alpha)
    if not -1.0 <= alpha <= 1.0:
        raise InvalidParameterError(f"alpha must lie in [-1, 1], got {alpha}")
    u = T.grid
    if alpha == 1.0:
        return T
    if alpha == -1.0:
        return invert(T)
    if alpha > 0:
        return TransportMap(u + alpha * (T.tvals - u))
    if alpha == 0:
        return TransportMap(u)
    return TransportMap(u + alpha * (u - invert(T).tvals))


def sign(T: TransportMap) -> int:
    """Overall direction of mass movement: sign of the integral of ``T(u) - u``."""
    return int(np.sign(integrate(T.displacement())))


def norm1(T: TransportMap) -> float:
    """L1 distance of ``T`` from the identity map."""
    return float(integrate(np.abs(T.displacement())))


def transport_distance(T1: TransportMap, T2: TransportMap, p: float = 1) -> float:
    check_same_grid(T1, T2)
    return _lp_distance(T1.tvals, T2.tvals, p)


def geodesic(T: TransportMap, s: float) -> TransportMap:
    """Constant-speed geodesic from ``T^{-1}`` (s=0) through the identity to ``T`` (s=1)."""
    if not 0.0 <= s <= 1.0:
        raise InvalidParameterError(f"geodesic parameter must lie in [0, 1], got {s}")
    return scalar_mult(2.0 * s - 1.0, T)


_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo: float, hi: float, tol: float = 1e-8):
    """Minimise a unimodal scalar function on ``[lo, hi]``. Returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    # endpoints are candidates too: the optimum often sits at a = 0 or a = 1
    candidates = [(f(lo), lo), (f(hi), hi), (f(0.5 * (a + b)), 0.5 * (a + b))]
    fx, x = min(candidates)
    return x, fx


def equiv_class_distance(Tq: TransportMap, Trep: TransportMap, tol: float = 1e-8) -> float:
    """Distance in d_{W,1} from ``Tq`` to the equivalence class of ``Trep``.

    Searches over ``id + a (Trep - id)`` and over ``id + a (Tq - id)`` for
    ``a`` in [0, 1] and returns the smaller of the two minima.
    """
    check_same_grid(Tq, Trep)
    u = Tq.grid
    dq = Tq.tvals - u
    dr = Trep.tvals - u

    def along_rep(a):
        return float(integrate(np.abs(dq - a * dr)))

    def along_query(a):
        return float(integrate(np.abs(a * dq - dr)))

    _, best_rep = golden_section(along_rep, 0.0, 1.0, tol)
    _, best_query = golden_section(along_query, 0.0, 1.0, tol)
    return min(best_rep, best_query)
