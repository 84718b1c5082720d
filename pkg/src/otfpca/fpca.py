"""Raw covariances, local-linear covariance smoothing, eigenanalysis and FPC scores.

The smoother fits, at every point ``(s, t)`` of a regular ``G x G`` grid, a
weighted plane to the off-diagonal raw products ``v_ij * v_il`` (``j != l``)
with product-kernel weights ``w_i K_h(t_ij - s) K_h(t_il - t)`` and
``w_i = 1 / (n N_i (N_i - 1))``. Only the intercept is kept.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    ConditioningError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    NotEstimableError,
)
from .grid import TransportMap, trapezoid_weights, unit_grid
from .kernels import as_kernel
from .links import as_link
from .transport import norm1, sign

__all__ = [
    "CLAMP_EPS",
    "CovarianceSurface",
    "EigenSystem",
    "AnalyticBasis",
    "RawScores",
    "raw_scores",
    "smooth_covariance",
    "covariance_at",
    "eigendecompose",
    "select_components",
    "dense_scores",
    "pace_scores",
]

CLAMP_EPS = 1e-6


def interp_matrix(x, grid: np.ndarray) -> np.ndarray:
    """Matrix ``L`` with ``L @ f`` the linear interpolant of grid values ``f`` at ``x``."""
    x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), grid[0], grid[-1])
    G = grid.size
    j = np.clip(np.searchsorted(grid, x, side="right") - 1, 0, G - 2)
    frac = (x - grid[j]) / (grid[j + 1] - grid[j])
    L = np.zeros((x.size, G))
    rows = np.arange(x.size)
    L[rows, j] = 1.0 - frac
    L[rows, j + 1] += frac
    return L


@dataclass(frozen=True)
class CovarianceSurface:
    """Symmetric covariance function tabulated on ``unit_grid(G)`` squared."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError("covariance surface must be a square matrix")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("covariance surface has non-finite entries")
        if np.max(np.abs(v - v.T), initial=0.0) > 1e-12 * max(1.0, np.abs(v).max()):
            raise InvalidInputError("covariance surface is not symmetric")
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid_size(self) -> int:
        return self.values.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return unit_grid(self.grid_size)

    def __call__(self, s, t) -> np.ndarray:
        """Bilinear interpolation on the outer product of ``s`` and ``t``."""
        Ls = interp_matrix(s, self.grid)
        Lt = interp_matrix(t, self.grid)
        return Ls @ self.values @ Lt.T


@dataclass(frozen=True)
class EigenSystem:
    """Descending eigenvalues and L2-orthonormal eigenfunctions on a time grid.

    Calling the object evaluates the eigenfunctions by linear interpolation:
    ``eig(t)`` has shape ``(K, len(t))``.
    """

    values: np.ndarray
    functions: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        funcs = np.atleast_2d(np.array(self.functions, dtype=float))
        if funcs.shape[0] != vals.size:
            raise InvalidInputError("need one eigenfunction per eigenvalue")
        if np.any(np.diff(vals) > 0) or np.any(vals < 0):
            raise InvalidInputError("eigenvalues must be non-negative and descending")
        gram = funcs @ (funcs * trapezoid_weights(funcs.shape[1])).T
        if np.max(np.abs(gram - np.eye(vals.size)), initial=0.0) > 1e-8:
            raise InvalidInputError("eigenfunctions are not orthonormal")
        vals.setflags(write=False)
        funcs.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "functions", funcs)

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return unit_grid(self.functions.shape[1])

    def __call__(self, t) -> np.ndarray:
        return self.functions @ interp_matrix(t, self.grid).T

    def reconstruct(self, scores, t) -> np.ndarray:
        """Truncated expansion ``sum_k scores_k phi_k(t)``."""
        scores = np.asarray(scores, dtype=float)
        return scores @ self(t)[: scores.size]

    def orthonormality_residual(self) -> float:
        gram = self.functions @ (self.functions * trapezoid_weights(self.functions.shape[1])).T
        return float(np.max(np.abs(gram - np.eye(self.count))))


class AnalyticBasis:
    """Eigenvalues paired with closed-form eigenfunctions.

    Drop-in replacement for :class:`EigenSystem` wherever only evaluation is
    needed, e.g. to inject known model components.
    """

    def __init__(self, values, functions: Sequence[Callable]):
        self.values = np.asarray(values, dtype=float)
        self._functions = list(functions)
        if len(self._functions) != self.values.size:
            raise InvalidInputError("need one function per eigenvalue")

    @property
    def count(self) -> int:
        return self.values.size

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.vstack([np.broadcast_to(f(t), t.shape) for f in self._functions])

    def reconstruct(self, scores, t) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        return scores @ self(t)[: scores.size]

    def covariance(self, s, t) -> np.ndarray:
        return (self(s).T * self.values) @ self(t)


class RawScores(NamedTuple):
    times: np.ndarray
    u: np.ndarray
    z: np.ndarray
    scaled: np.ndarray


def raw_scores(times, transports: Sequence[TransportMap], norm_T0: float = 1.0, link="arctan", kappa: float = 1.0) -> RawScores:
    """Signed transport sizes turned into observations of U and Z.

    ``u = ||T|| sign(T) / norm_T0`` clamped to ``[-1 + 1e-6, 1 - 1e-6]``,
    ``z = g^{-1}(u)`` and ``scaled = ||T|| sign(T) / kappa``.
    """
    if norm_T0 <= 0:
        raise InvalidParameterError(f"norm_T0 must be positive, got {norm_T0}")
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    link = as_link(link)
    signed = np.array([norm1(T) * sign(T) for T in transports], dtype=float)
    u = np.clip(signed / norm_T0, -1.0 + CLAMP_EPS, 1.0 - CLAMP_EPS)
    z = link.inverse(u)
    return RawScores(np.asarray(times, dtype=float), u, z, signed / kappa)


def _moment_sums(obs_t, obs_v, starts, w_subj, grid_s, grid_t, h, kernel):
    """Off-diagonal kernel moment sums, shape (len(grid_s), len(grid_t)) each.

    Uses sum_{j != l} = (sum_j)(sum_l) - sum_{j = l} within each subject.
    """
    w_obs = np.repeat(w_subj, np.diff(np.append(starts, obs_t.size)))

    def powers(grid):
        d = (obs_t[:, None] - grid[None, :]) / h
        K = kernel(obs_t[:, None] - grid[None, :], h)
        return [K, K * d, K * d * d]

    A, B = powers(grid_s), powers(grid_t)

    def off_diag(p, q, c):
        left = A[p] * c[:, None]
        right = B[q] * c[:, None]
        full = (np.add.reduceat(left, starts, axis=0) * w_subj[:, None]).T @ np.add.reduceat(right, starts, axis=0)
        diag = (left * w_obs[:, None]).T @ right
        return full - diag

    one = np.ones_like(obs_v)
    S = np.empty((grid_s.size, grid_t.size, 3, 3))
    S[..., 0, 0] = off_diag(0, 0, one)
    S[..., 0, 1] = S[..., 1, 0] = off_diag(1, 0, one)
    S[..., 0, 2] = S[..., 2, 0] = off_diag(0, 1, one)
    S[..., 1, 1] = off_diag(2, 0, one)
    S[..., 1, 2] = S[..., 2, 1] = off_diag(1, 1, one)
    S[..., 2, 2] = off_diag(0, 2, one)
    r = np.stack([off_diag(0, 0, obs_v), off_diag(1, 0, obs_v), off_diag(0, 1, obs_v)], axis=-1)
    return S, r


def _local_plane(S, r):
    """Minimum-norm plane coefficients and a flag for an identified intercept."""
    scale = np.abs(S).max(axis=(-2, -1), keepdims=True)
    scale = np.where(scale > 0, scale, 1.0)
    Sn = S / scale
    pinv = np.linalg.pinv(Sn, rcond=1e-10, hermitian=True)
    beta = np.einsum("...ij,...j->...i", pinv, r / scale[..., 0])
    proj = np.einsum("...ij,...j->...i", Sn, pinv[..., :, 0])
    identified = np.abs(proj - np.array([1.0, 0.0, 0.0])).max(axis=-1) < 1e-8
    return beta, identified


def _local_plane_intercept(S, r):
    """Intercept of the weighted plane fit, NaN where it is not identified."""
    beta, identified = _local_plane(S, r)
    return np.where(identified, beta[..., 0], np.nan)


def _pool(raw):
    kept_t, kept_v, counts = [], [], []
    skipped = 0
    for times, values in raw:
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.size != values.size:
            raise InvalidInputError("times and values differ in length")
        if times.size < 2:
            skipped += 1
            continue
        kept_t.append(times)
        kept_v.append(values)
        counts.append(times.size)
    if skipped:
        warnings.warn(f"{skipped} subject(s) with fewer than 2 observations skipped", stacklevel=3)
    if not kept_t:
        raise InsufficientDataError("no subject has two or more observations")
    counts = np.array(counts, dtype=float)
    n = counts.size + skipped
    w_subj = 1.0 / (n * counts * (counts - 1.0))
    starts = np.concatenate([[0], np.cumsum(counts[:-1])]).astype(int)
    return np.concatenate(kept_t), np.concatenate(kept_v), starts, w_subj


def covariance_at(raw, s: float, t: float, h: float, kernel="epanechnikov"):
    """Local plane fit of the off-diagonal raw covariances at one point ``(s, t)``.

    Returns ``(coefficients, identified)``: intercept and the two slopes of the
    minimum-norm weighted least-squares solution, and whether the intercept
    is uniquely determined by the local design.
    """
    if h <= 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {h}")
    obs_t, obs_v, starts, w_subj = _pool(raw)
    S, r = _moment_sums(obs_t, obs_v, starts, w_subj, np.array([float(s)]), np.array([float(t)]), h, as_kernel(kernel))
    beta, identified = _local_plane(S, r)
    return beta[0, 0], bool(identified[0, 0])


def smooth_covariance(raw, h: float, kernel="epanechnikov", G: int = 51, max_widen: int = 3) -> CovarianceSurface:
    """Local-linear smoother of off-diagonal raw covariances.

    Parameters
    ----------
    raw : sequence of (times, values)
        One entry per subject. Raw covariances are the products
        ``values[j] * values[l]`` for ``j != l``.
    h : float
        Bandwidth, the same in both directions.
    kernel : str or KernelSpec
    G : int
        Output grid size.
    max_widen : int
        Grid points whose local fit is not identified are refitted with the
        bandwidth doubled, at most this many times.

    Returns
    -------
    CovarianceSurface
    """
    if h <= 0:
        raise InvalidParameterError(f"bandwidth must be positive, got {h}")
    kernel = as_kernel(kernel)
    obs_t, obs_v, starts, w_subj = _pool(raw)
    grid = unit_grid(G)

    surface = np.full((G, G), np.nan)
    bw = h
    for _ in range(max_widen + 1):
        S, r = _moment_sums(obs_t, obs_v, starts, w_subj, grid, grid, bw, kernel)
        est = _local_plane_intercept(S, r)
        fill = np.isnan(surface)
        surface[fill] = est[fill]
        if not np.isnan(surface).any():
            break
        bw *= 2.0
    if np.isnan(surface).any():
        a, b = np.argwhere(np.isnan(surface))[0]
        raise NotEstimableError(
            f"covariance not estimable at (s, t) = ({grid[a]:.3g}, {grid[b]:.3g}) even with bandwidth {bw / 2:.3g}"
        )
    return CovarianceSurface(0.5 * (surface + surface.T))


def eigendecompose(surface: CovarianceSurface, K: int = None) -> EigenSystem:
    """Eigenpairs of the integral operator with kernel ``surface``.

    The operator is discretised with trapezoidal weights ``W`` and the
    symmetric matrix ``W^{1/2} C W^{1/2}`` is diagonalised. Eigenfunctions are
    L2-normalised, signed so that their integral is non-negative (ties broken
    by a positive value at 0). Negative eigenvalues are clipped to zero.
    """
    G = surface.grid_size
    K = G if K is None else int(K)
    if not 1 <= K <= G:
        raise InvalidParameterError(f"number of components must be in [1, {G}], got {K}")
    w = trapezoid_weights(G)
    sw = np.sqrt(w)
    vals, vecs = np.linalg.eigh(sw[:, None] * surface.values * sw[None, :])
    order = np.argsort(vals)[::-1][:K]
    vals = np.clip(vals[order], 0.0, None)
    funcs = (vecs[:, order] / sw[:, None]).T
    integrals = funcs @ w
    flip = (integrals < -1e-10) | ((np.abs(integrals) <= 1e-10) & (funcs[:, 0] < 0))
    funcs[flip] *= -1.0
    return EigenSystem(vals, funcs)


def select_components(eigenvalues, fve: float = 0.95, cap: int = 20) -> int:
    """Smallest J whose cumulative eigenvalue share reaches ``fve``, at most ``cap``."""
    vals = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = vals.sum()
    if total <= 0:
        return 1
    J = int(np.searchsorted(np.cumsum(vals) / total, fve - 1e-12) + 1)
    return max(1, min(J, cap, vals.size))


def dense_scores(times, values, eig, J: int) -> np.ndarray:
    """Sample-mean scores ``(1/N) sum_j values_j phi_k(t_j)`` for ``k <= J``."""
    if not 1 <= J <= eig.count:
        raise InvalidParameterError(f"J must be in [1, {eig.count}], got {J}")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InvalidInputError("need at least one observation")
    return eig(times)[:J] @ values / values.size


def pace_scores(
    times,
    values,
    eigenvalues,
    eigenfunctions: Callable,
    covariance: Callable,
    J: int = None,
    ridge: float = 1e-8,
    cond_limit: float = 1e12,
) -> np.ndarray:
    """Best linear predictors of FPC scores from a few noisy-free observations.

    ``chi_l = eta_l * psi_l(t)^T Sigma^{-1} z`` with ``Sigma = D(t, t)``. If
    ``Sigma`` has condition number above ``cond_limit``, ``ridge * trace / N``
    is added to its diagonal before solving.

    Parameters
    ----------
    times, values : array_like
        Observation times (distinct) and observed values of the process.
    eigenvalues : array_like
    eigenfunctions : callable
        ``eigenfunctions(t)`` returns an array of shape ``(K, len(t))``.
    covariance : callable
        ``covariance(s, t)`` returns the matrix ``D(s_a, t_b)``.
    J : int, optional
        Number of scores returned (default: all).
    """
    times = np.asarray(times, dtype=float)
    z = np.asarray(values, dtype=float)
    if times.size == 0 or times.size != z.size:
        raise InvalidInputError("times and values must be non-empty and of equal length")
    if np.unique(times).size != times.size:
        raise InvalidInputError("observation times must be distinct")
    eta = np.asarray(eigenvalues, dtype=float)
    J = eta.size if J is None else int(J)
    if not 1 <= J <= eta.size:
        raise InvalidParameterError(f"J must be in [1, {eta.size}], got {J}")
    sigma = np.asarray(covariance(times, times), dtype=float)
    sigma = 0.5 * (sigma + sigma.T)
    if not np.all(np.isfinite(sigma)):
        raise ConditioningError("covariance at observation times has non-finite entries")
    if not np.any(sigma):
        # degenerate process: the predictor is identically zero
        return np.zeros(J)
    if np.linalg.cond(sigma) > cond_limit:
        sigma = sigma + ridge * np.trace(sigma) / times.size * np.eye(times.size)
    try:
        coef = np.linalg.solve(sigma, z)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(f"covariance at observation times is singular: {exc}") from exc
    if not np.all(np.isfinite(coef)):
        raise ConditioningError("covariance at observation times is singular")
    psi = eigenfunctions(times)[:J]
    return eta[:J] * (psi @ coef)
