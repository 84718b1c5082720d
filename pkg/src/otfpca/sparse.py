"""Sparse-design predictor under a Gaussian working model for the latent process Z."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dense import SubjectFit, _apply_multiplier, _make_baseline, _multiplier_rows, estimate_baselines
from .errors import InvalidParameterError
from .fpca import CovarianceSurface, EigenSystem, eigendecompose, pace_scores, raw_scores, select_components, smooth_covariance
from .frechet import Panel, default_bandwidth, mean_transport
from .grid import TransportMap
from .kernels import as_kernel
from .links import LinkFunction, as_link
from .transport import norm1, sign

__all__ = ["FittedSparseModel", "pooled_norm", "fit_sparse", "predict_sparse", "predict_sparse_path"]


def pooled_norm(panel: Panel) -> float:
    """Norm of the mean of all positive-sign transports in the panel.

    A heuristic default for the pre-fixed baseline norm.
    """
    positive = [T for s in panel for T in s.payloads if sign(T) > 0]
    if not positive:
        positive = [T for s in panel for T in s.payloads]
    value = norm1(mean_transport(positive))
    if value == 0.0:
        raise InvalidParameterError("all transports are the identity; pass norm_T0 explicitly")
    return value


@dataclass(frozen=True)
class FittedSparseModel:
    """Output of :func:`fit_sparse`.

    ``subjects`` maps ids to :class:`SubjectFit` whose scores are the
    conditional-expectation scores of Z. ``empirical_norms`` records the norm
    of each subject's mean positive transport as a diagnostic for the common
    baseline-norm assumption.
    """

    norm_T0: float
    link: LinkFunction
    eig: EigenSystem
    surface: CovarianceSurface
    subjects: dict
    J: int
    grid_size: int
    bandwidth: float = None
    empirical_norms: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def latent(self, sid, t) -> np.ndarray:
        """Truncated reconstruction of Z for subject ``sid``."""
        fit = self._subject(sid)
        return self.eig.reconstruct(fit.scores[: self.J], np.atleast_1d(t))

    def _subject(self, sid) -> SubjectFit:
        try:
            return self.subjects[str(sid)]
        except KeyError:
            raise KeyError(f"unknown subject {sid!r}") from None


def fit_sparse(
    panel: Panel,
    norm_T0: float = None,
    link="arctan",
    h: float = None,
    kernel="epanechnikov",
    G: int = 51,
    J: int = None,
    ridge: float = 1e-8,
    fve: float = 0.95,
    max_components: int = 20,
) -> FittedSparseModel:
    """Fit the sparse-design model to a centered panel of transports.

    Parameters
    ----------
    panel : Panel
        Payloads must be :class:`TransportMap`.
    norm_T0 : float, optional
        Pre-fixed norm of the baseline transports. Defaults to
        :func:`pooled_norm`.
    link : str or LinkFunction
    h : float, optional
        Covariance bandwidth, default ``(n Nbar^2)^(-1/6)``.
    kernel, G, J, fve, max_components
        As in :func:`otfpca.dense.fit_dense`.
    ridge : float
        Relative ridge added to ill-conditioned covariance matrices.
    """
    link = as_link(link)
    kernel = as_kernel(kernel)
    if norm_T0 is None:
        norm_T0 = pooled_norm(panel)
    if norm_T0 <= 0:
        raise InvalidParameterError(f"norm_T0 must be positive, got {norm_T0}")
    if h is None:
        h = default_bandwidth(panel.counts)
    M = panel.subjects[0].payloads[0].grid_size

    zhat = {s.id: raw_scores(s.times, s.payloads, norm_T0, link).z for s in panel}
    surface = smooth_covariance([(s.times, zhat[s.id]) for s in panel], h, kernel, G)
    eig = eigendecompose(surface)
    if J is None:
        J = select_components(eig.values, fve, max_components)
    if not 1 <= J <= eig.count:
        raise InvalidParameterError(f"J must be in [1, {eig.count}], got {J}")

    fits, diagnostics = {}, {}
    for s in panel:
        T_plus, T_minus, n_plus, n_minus = estimate_baselines(list(s.payloads))
        diagnostics[s.id] = norm1(T_plus) if n_plus else -norm1(T_minus)
        fits[s.id] = SubjectFit(
            id=s.id,
            plus=_make_baseline(T_plus, n_plus, norm_T0),
            minus=_make_baseline(T_minus, n_minus, norm_T0),
            scores=pace_scores(s.times, zhat[s.id], eig.values, eig, surface, J, ridge),
            times=s.times,
        )
    config = {
        "norm_T0": norm_T0,
        "link": link.variant,
        "h": h,
        "kernel": kernel.name,
        "G": G,
        "J": J,
        "M": M,
        "ridge": ridge,
    }
    return FittedSparseModel(norm_T0, link, eig, surface, fits, J, M, h, diagnostics, config)


def predict_sparse(model: FittedSparseModel, sid, t: float) -> TransportMap:
    """Predicted transport ``g(Z_hat(t)) (.) T_plus`` for subject ``sid``."""
    if not 0.0 <= t <= 1.0:
        raise InvalidParameterError(f"t must lie in [0, 1], got {t}")
    fit = model._subject(sid)
    z = float(model.eig.reconstruct(fit.scores[: model.J], [t])[0])
    alpha = float(model.link(z))
    if fit.positive_set_empty:
        return _apply_multiplier(-alpha, model.norm_T0, fit.minus, model.grid_size)
    return _apply_multiplier(alpha, model.norm_T0, fit.plus, model.grid_size)


def predict_sparse_path(model: FittedSparseModel, sid, times) -> np.ndarray:
    """Predicted transports at several times, shape ``(len(times), M)``."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any((times < 0.0) | (times > 1.0)):
        raise InvalidParameterError("prediction times must lie in [0, 1]")
    fit = model._subject(sid)
    alphas = model.link(model.eig.reconstruct(fit.scores[: model.J], times))
    return _multiplier_rows(np.asarray(alphas, dtype=float), model.norm_T0, fit, model.grid_size)
