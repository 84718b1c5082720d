"""Transport process model for densely observed trajectories.

Each subject's trajectory is reconstructed as ``U_hat(t) (.) T_plus`` where
``T_plus`` is the subject's mean positive transport rescaled to norm
``kappa`` and ``U_hat`` is a truncated Karhunen-Loeve expansion of the
scaled multiplier process.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateBaselineError, FeasibilityWarning, InsufficientDataError, InvalidParameterError
from .fpca import EigenSystem, dense_scores, eigendecompose, raw_scores, select_components, smooth_covariance
from .frechet import Panel, default_bandwidth, mean_transport
from .grid import TransportMap
from .kernels import as_kernel
from .transport import invert, norm1, scalar_mult, sign

__all__ = [
    "Baseline",
    "SubjectFit",
    "FittedDenseModel",
    "estimate_baselines",
    "rescale_baseline",
    "max_feasible_scale",
    "fit_dense",
    "predict_dense",
    "predict_dense_path",
    "multiplier_path",
]


def estimate_baselines(transports: Sequence[TransportMap]):
    """Sign-partitioned transport means.

    Returns ``(T_plus, T_minus, n_plus, n_minus)``. Transports with sign 0 go
    to the positive set; an empty set yields the identity with count 0.
    """
    if len(transports) == 0:
        raise InsufficientDataError("need at least one transport")
    plus = [T for T in transports if sign(T) >= 0]
    minus = [T for T in transports if sign(T) < 0]
    M = transports[0].grid_size
    T_plus = mean_transport(plus) if plus else TransportMap.identity(M)
    T_minus = mean_transport(minus) if minus else TransportMap.identity(M)
    return T_plus, T_minus, len(plus), len(minus)


def max_feasible_scale(T: TransportMap) -> float:
    """Largest ``c`` for which ``u + c (T(u) - u)`` stays non-decreasing on the grid."""
    du = np.diff(T.grid)
    dT = np.diff(T.tvals)
    shrinking = dT < du
    if not np.any(shrinking):
        return np.inf
    return float(np.min(du[shrinking] / (du[shrinking] - dT[shrinking])))


def rescale_baseline(T: TransportMap, kappa: float, warn: bool = True):
    """Stretch the displacement of ``T`` so that its L1 norm equals ``kappa``.

    If the stretched map would stop being monotone, the scale is cut back to
    the largest feasible value.

    Returns
    -------
    (TransportMap, float)
        The rescaled map and the norm actually achieved.
    """
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    size = norm1(T)
    if size == 0.0:
        raise DegenerateBaselineError("cannot rescale the identity transport")
    c = kappa / size
    c_max = max_feasible_scale(T)
    if c > c_max:
        if warn:
            warnings.warn(
                f"baseline scale {c:.4g} is infeasible; reduced to {c_max:.4g}",
                FeasibilityWarning,
                stacklevel=2,
            )
        c = c_max
    u = T.grid
    # guard against the last ulp pushing a slope below zero
    scaled = np.maximum.accumulate(np.clip(u + c * (T.tvals - u), 0.0, 1.0))
    out = TransportMap(scaled)
    return out, norm1(out)


@dataclass(frozen=True)
class Baseline:
    """A rescaled baseline transport and the norm it achieves."""

    transport: TransportMap
    norm: float
    raw: TransportMap
    count: int


@dataclass(frozen=True)
class SubjectFit:
    id: str
    plus: Optional[Baseline]
    minus: Optional[Baseline]
    scores: np.ndarray
    times: np.ndarray

    @property
    def positive_set_empty(self) -> bool:
        return self.plus is None or self.plus.count == 0


def _make_baseline(raw: TransportMap, count: int, target: float) -> Optional[Baseline]:
    if count == 0 or norm1(raw) == 0.0:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FeasibilityWarning)
        T, achieved = rescale_baseline(raw, target, warn=False)
    return Baseline(T, achieved, raw, count)


def _apply_multiplier(multiplier: float, scale: float, base: Optional[Baseline], M: int) -> TransportMap:
    """``alpha (.) baseline`` with ``alpha`` expressed relative to the achieved norm.

    ``multiplier`` is relative to a baseline of norm ``scale``; if the stored
    baseline reached a smaller norm the multiplier is stretched accordingly so
    that positive multipliers reproduce ``u + multiplier * scale / ||T~|| (T~ - u)``.
    """
    if base is None:
        return TransportMap.identity(M)
    alpha = multiplier * scale / base.norm
    return scalar_mult(float(np.clip(alpha, -1.0, 1.0)), base.transport)


@dataclass(frozen=True)
class FittedDenseModel:
    """Output of :func:`fit_dense`.

    Attributes
    ----------
    kappa : float
        Baseline norm used for the scaled multiplier process.
    eig : EigenSystem
        Eigenpairs of the scaled multiplier covariance.
    subjects : dict
        :class:`SubjectFit` per subject id.
    J : int
        Number of components used in reconstructions.
    """

    kappa: float
    eig: EigenSystem
    subjects: dict
    J: int
    grid_size: int
    surface: object = None
    bandwidth: float = None
    config: dict = field(default_factory=dict)

    def multiplier(self, sid, t) -> np.ndarray:
        """Truncated reconstruction of the scaled multiplier process."""
        fit = self._subject(sid)
        return self.eig.reconstruct(fit.scores[: self.J], np.atleast_1d(t))

    def _subject(self, sid) -> SubjectFit:
        try:
            return self.subjects[str(sid)]
        except KeyError:
            raise KeyError(f"unknown subject {sid!r}") from None


def fit_dense(
    panel: Panel,
    kappa: float = 1.0,
    h: float = None,
    kernel="epanechnikov",
    G: int = 51,
    J: int = None,
    fve: float = 0.95,
    max_components: int = 20,
) -> FittedDenseModel:
    """Fit the transport process model to a centered panel of transports.

    Parameters
    ----------
    panel : Panel
        Payloads must be :class:`TransportMap` (see :func:`center_panel`).
    kappa : float
        Norm of the rescaled baselines. The reconstruction does not depend on it
        as long as positive multipliers stay inside [0, 1].
    h : float, optional
        Covariance bandwidth, default ``(n Nbar^2)^(-1/6)``.
    kernel : str or KernelSpec
    G : int
        Time grid size for the covariance surface.
    J : int, optional
        Number of components; default chooses the smallest J explaining ``fve``
        of the variance, capped at ``max_components``.
    """
    if kappa <= 0:
        raise InvalidParameterError(f"kappa must be positive, got {kappa}")
    kernel = as_kernel(kernel)
    transports = {s.id: list(s.payloads) for s in panel}
    M = panel.subjects[0].payloads[0].grid_size
    if h is None:
        h = default_bandwidth(panel.counts)

    raw = {}
    for s in panel:
        rs = raw_scores(s.times, transports[s.id], kappa=kappa)
        raw[s.id] = rs.scaled
    surface = smooth_covariance([(s.times, raw[s.id]) for s in panel], h, kernel, G)
    eig = eigendecompose(surface)
    if J is None:
        J = select_components(eig.values, fve, max_components)
    if not 1 <= J <= eig.count:
        raise InvalidParameterError(f"J must be in [1, {eig.count}], got {J}")

    fits = {}
    for s in panel:
        T_plus, T_minus, n_plus, n_minus = estimate_baselines(transports[s.id])
        fits[s.id] = SubjectFit(
            id=s.id,
            plus=_make_baseline(T_plus, n_plus, kappa),
            minus=_make_baseline(T_minus, n_minus, kappa),
            scores=dense_scores(s.times, raw[s.id], eig, J),
            times=s.times,
        )
    config = {"kappa": kappa, "h": h, "kernel": kernel.name, "G": G, "J": J, "M": M}
    return FittedDenseModel(kappa, eig, fits, J, M, surface, h, config)


def predict_dense(model: FittedDenseModel, sid, t: float) -> TransportMap:
    """Reconstructed transport of subject ``sid`` at time ``t``."""
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"t must lie in [0, 1], got {t}")
    fit = model._subject(sid)
    U = float(model.eig.reconstruct(fit.scores[: model.J], [t])[0])
    U = float(np.clip(U, -1.0, 1.0))
    if fit.positive_set_empty:
        return _apply_multiplier(-U, model.kappa, fit.minus, model.grid_size)
    return _apply_multiplier(U, model.kappa, fit.plus, model.grid_size)


def multiplier_path(alphas, base: TransportMap) -> np.ndarray:
    """Rows ``alpha_k (.) base`` for a vector of multipliers in [-1, 1].

    Equivalent to stacking :func:`scalar_mult` calls, with the inverse of
    ``base`` computed once.
    """
    alphas = np.asarray(alphas, dtype=float)[:, None]
    u = base.grid
    out = u + np.where(alphas >= 0, alphas * (base.tvals - u), 0.0)
    if np.any(alphas < 0):
        inv = invert(base).tvals
        out = np.where(alphas < 0, u + alphas * (u - inv), out)
    return np.maximum.accumulate(np.clip(out, 0.0, 1.0), axis=1)


def predict_dense_path(model: FittedDenseModel, sid, times) -> np.ndarray:
    """Reconstructed transports at several times, shape ``(len(times), M)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any((times < 0.0) | (times > 1.0)):
        raise InvalidParameterError("prediction times must lie in [0, 1]")
    fit = model._subject(sid)
    U = np.clip(model.eig.reconstruct(fit.scores[: model.J], times), -1.0, 1.0)
    return _multiplier_rows(U, model.kappa, fit, model.grid_size)


def _multiplier_rows(multipliers, scale, fit: SubjectFit, M: int) -> np.ndarray:
    base = fit.plus
    if fit.positive_set_empty:
        multipliers, base = -multipliers, fit.minus
    if base is None:
        return np.tile(np.linspace(0.0, 1.0, M), (multipliers.size, 1))
    alphas = np.clip(multipliers * scale / base.norm, -1.0, 1.0)
    return multiplier_path(alphas, base.transport)
