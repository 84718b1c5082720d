"""Fréchet means of measures and transports, and centering of distributional panels.

A :class:`Panel` holds per-subject observation times in [0, 1] with one
payload per time: a raw sample vector, a :class:`GridMeasure` or a
:class:`TransportMap`. :func:`center_panel` replaces every payload by the
optimal transport from the cross-sectional barycenter at that time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import (
    ConfigurationError,
    DegenerateWindowError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
)
from .grid import GridMeasure, TransportMap, check_same_grid, unit_grid
from .kernels import KernelSpec, as_kernel
from .measures import empirical_quantile, transport_to_measure
from .transport import optimal_transport

__all__ = [
    "Subject",
    "Panel",
    "BarycenterPath",
    "as_measure",
    "cross_sectional_mean",
    "mean_transport",
    "local_frechet_weights",
    "local_frechet_mean",
    "default_bandwidth",
    "center_panel",
]

Payload = Union[np.ndarray, GridMeasure, TransportMap]


@dataclass(frozen=True)
class Subject:
    """Observations of one realisation: distinct times and one payload per time."""

    id: str
    times: np.ndarray
    payloads: tuple

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        payloads = tuple(self.payloads)
        if times.size != len(payloads):
            raise InvalidInputError(f"subject {self.id}: {times.size} times but {len(payloads)} payloads")
        if times.size == 0:
            raise InvalidInputError(f"subject {self.id} has no observations")
        if np.any((times < 0.0) | (times > 1.0)) or not np.all(np.isfinite(times)):
            raise InvalidInputError(f"subject {self.id}: observation times must lie in [0, 1]")
        order = np.argsort(times, kind="stable")
        times = times[order]
        if np.any(np.diff(times) == 0.0):
            raise InvalidInputError(f"subject {self.id}: observation times must be distinct")
        times.setflags(write=False)
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "payloads", tuple(payloads[k] for k in order))

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class BarycenterPath:
    """Barycenter quantile functions at increasing times, linearly interpolated."""

    times: np.ndarray
    measures: tuple

    def __call__(self, t: float) -> GridMeasure:
        times = self.times
        if times.size == 1 or t <= times[0]:
            return self.measures[0]
        if t >= times[-1]:
            return self.measures[-1]
        j = int(np.searchsorted(times, t, side="right"))
        w = (t - times[j - 1]) / (times[j] - times[j - 1])
        if w == 0.0:
            return self.measures[j - 1]
        q = (1.0 - w) * self.measures[j - 1].qvals + w * self.measures[j].qvals
        return GridMeasure(q)

    def matrix(self) -> np.ndarray:
        return np.vstack([m.qvals for m in self.measures])


@dataclass(frozen=True)
class Panel:
    """A sample of partially observed distribution-valued trajectories.

    Parameters
    ----------
    subjects : sequence of Subject
    design : {"random", "fixed"}
        Fixed designs share observation times across subjects.
    barycenter : BarycenterPath, optional
        Set by :func:`center_panel` on its output.
    time_map : (float, float), optional
        Original time units of 0 and 1, kept for reporting.
    value_map : (float, float), optional
        Original support bounds of the measures, kept for reporting.
    """

    subjects: tuple
    design: str = "random"
    barycenter: Optional[BarycenterPath] = None
    time_map: tuple = (0.0, 1.0)
    value_map: tuple = (0.0, 1.0)
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        subjects = tuple(self.subjects)
        if not subjects:
            raise InvalidInputError("panel has no subjects")
        if self.design not in ("random", "fixed"):
            raise InvalidParameterError(f"design must be 'random' or 'fixed', got {self.design!r}")
        ids = [s.id for s in subjects]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("subject ids must be unique")
        object.__setattr__(self, "subjects", subjects)

    def __len__(self):
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    @property
    def ids(self) -> list:
        return [s.id for s in self.subjects]

    def subject(self, sid) -> Subject:
        for s in self.subjects:
            if s.id == str(sid):
                return s
        raise KeyError(f"unknown subject {sid!r}")

    @property
    def counts(self) -> np.ndarray:
        return np.array([len(s) for s in self.subjects])


def as_measure(payload: Payload, M: int = 101) -> GridMeasure:
    """Convert a payload into a quantile-grid measure."""
    if isinstance(payload, GridMeasure):
        return payload
    if isinstance(payload, TransportMap):
        return transport_to_measure(payload)
    return empirical_quantile(payload, M)


def cross_sectional_mean(measures: Sequence[GridMeasure]) -> GridMeasure:
    """Wasserstein barycenter: the pointwise mean of quantile functions."""
    if len(measures) == 0:
        raise InvalidInputError("cannot average an empty list of measures")
    check_same_grid(*measures)
    return GridMeasure(_pointwise_mean([m.qvals for m in measures]))


def _pointwise_mean(rows) -> np.ndarray:
    stacked = np.asarray(rows)
    # averaging copies of one curve returns it bit for bit
    if np.all(stacked == stacked[0]):
        return stacked[0].copy()
    return stacked.mean(axis=0)


def mean_transport(transports: Sequence[TransportMap]) -> TransportMap:
    """Fréchet mean in the transport space, the pointwise mean of the maps."""
    if len(transports) == 0:
        raise InvalidInputError("cannot average an empty list of transports")
    check_same_grid(*transports)
    return TransportMap(_pointwise_mean([T.tvals for T in transports]))


def default_bandwidth(counts, c: float = 1.0) -> float:
    """Plug-in bandwidth ``c (n Nbar^2)^(-1/6)`` from per-subject observation counts."""
    counts = np.asarray(counts, dtype=float)
    return float(c * (counts.size * counts.mean() ** 2) ** (-1.0 / 6.0))


def local_frechet_weights(times_by_subject, t: float, h: float, kernel="epanechnikov") -> list:
    """Local-linear weights for every observation, one array per subject.

    The weight on observation ``(i, j)`` is ``omega(t_ij, t, h) / (n N_i)`` so
    the weights sum to one and have zero first moment about ``t``.
    """
    kernel = as_kernel(kernel)
    times = [np.asarray(ts, dtype=float) for ts in times_by_subject]
    flat, sw = _flatten_times(times)
    w = _local_weights(flat, sw, np.array([t]), h, kernel)[0]
    out, start = [], 0
    for ts in times:
        out.append(w[start:start + ts.size])
        start += ts.size
    return out


def _flatten_times(times):
    n = len(times)
    flat = np.concatenate(times)
    sw = np.concatenate([np.full(ts.size, 1.0 / (n * ts.size)) for ts in times])
    return flat, sw


def _local_weights(flat, sw, targets, h, kernel: KernelSpec) -> np.ndarray:
    """Weight matrix of shape (len(targets), len(flat))."""
    d = flat[None, :] - targets[:, None]
    k = kernel(d, h)
    for row, t in enumerate(targets):
        support = np.unique(flat[k[row] > 0])
        if support.size < 2:
            raise InsufficientDataError(
                f"fewer than 2 distinct observation times in window around t={t:.4g}",
                window=(t - h, t + h),
            )
    kap0 = (k * sw).sum(axis=1)
    kap1 = (k * sw * d).sum(axis=1)
    kap2 = (k * sw * d * d).sum(axis=1)
    sigma2 = kap0 * kap2 - kap1**2
    bad = sigma2 <= 1e-14 * np.maximum(kap0 * kap2, 1e-300)
    if np.any(bad):
        t = targets[np.argmax(bad)]
        raise DegenerateWindowError(f"local-linear weights degenerate at t={t:.4g}")
    return sw * k * (kap2[:, None] - kap1[:, None] * d) / sigma2[:, None]


def _monotone_project(q: np.ndarray) -> np.ndarray:
    if np.all(np.diff(q) >= 0):
        return np.clip(q, 0.0, 1.0)
    return np.clip(isotonic_regression(q).x, 0.0, 1.0)


def _local_frechet_path(flat, sw, Q, targets, h, kernel) -> list:
    W = _local_weights(flat, sw, targets, h, kernel)
    raw = W @ Q
    return [GridMeasure(_monotone_project(row)) for row in raw]


def _stack(panel: Panel, M: int):
    times = [s.times for s in panel]
    flat, sw = _flatten_times(times)
    Q = np.vstack([as_measure(p, M).qvals for s in panel for p in s.payloads])
    return flat, sw, Q


def local_frechet_mean(panel: Panel, t: float, h: float, kernel="epanechnikov", M: int = 101) -> GridMeasure:
    """Local Fréchet regression estimate of the barycenter at time ``t``.

    Negative local-linear weights can break monotonicity of the averaged
    quantile function; the result is projected back by isotonic regression
    and clipped to [0, 1].
    """
    flat, sw, Q = _stack(panel, M)
    return _local_frechet_path(flat, sw, Q, np.array([float(t)]), h, as_kernel(kernel))[0]


def _fixed_design_path(panel: Panel, M: int) -> BarycenterPath:
    groups: dict = {}
    for s in panel:
        for t, p in zip(s.times, s.payloads):
            groups.setdefault(float(t), []).append(as_measure(p, M))
    times = np.array(sorted(groups))
    return BarycenterPath(times, tuple(cross_sectional_mean(groups[t]) for t in times))


def center_panel(
    panel: Panel,
    h: Optional[float] = None,
    kernel="epanechnikov",
    M: int = 101,
    G: int = 51,
    reference: Union[None, GridMeasure, Callable[[float], GridMeasure]] = None,
) -> Panel:
    """Replace each distributional observation by the transport from the barycenter.

    Parameters
    ----------
    panel : Panel
        Payloads may be raw samples, measures or transports.
    h : float, optional
        Bandwidth of the local Fréchet regression; required for random designs
        unless ``reference`` is given.
    kernel : str or KernelSpec
    M : int
        Quantile grid size used for raw samples.
    G : int
        Number of time points of the barycenter cache for random designs.
    reference : GridMeasure or callable, optional
        Known reference measure (or path ``t -> measure``). Skips barycenter
        estimation.

    Returns
    -------
    Panel
        Same subjects and times with :class:`TransportMap` payloads and the
        barycenter path attached.
    """
    if reference is not None:
        ref = (lambda t: reference) if isinstance(reference, GridMeasure) else reference
        path = None
    elif panel.design == "fixed":
        path = _fixed_design_path(panel, M)
        ref = path
    else:
        if h is None:
            raise ConfigurationError("random designs need a bandwidth h for the barycenter path")
        flat, sw, Q = _stack(panel, M)
        grid_t = unit_grid(G)
        path = BarycenterPath(grid_t, tuple(_local_frechet_path(flat, sw, Q, grid_t, h, as_kernel(kernel))))
        ref = path

    subjects = []
    for s in panel:
        maps = tuple(optimal_transport(ref(float(t)), as_measure(p, M)) for t, p in zip(s.times, s.payloads))
        subjects.append(Subject(s.id, s.times, maps))
    return replace(panel, subjects=tuple(subjects), barycenter=path)
