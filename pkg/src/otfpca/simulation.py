"""Monte Carlo harness: synthetic transport processes, sampling, fitting and IMSE.

The generating model is ``T_i(t) = g(Z_i(t)) (.) T_i0`` with
``Z_i(x) = sum_k xi_ik cos(2 (k - 1) pi x)``, ``xi_ik ~ N(0, k^-2)`` and
``T_i0`` the quantile function of ``Beta(a_i, b_i)`` rescaled to a common
norm. Observations are samples ``T_ij(V)`` with ``V ~ Unif(0, 1)``, i.e.
draws from the pushforward of the uniform measure.

Random streams: replication ``r`` draws from
``Generator(PCG64(SeedSequence(seed).spawn(reps)[r]))``, so every
replication depends only on the master seed and its index.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Optional, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import betaln

from .dense import fit_dense, multiplier_path, predict_dense_path
from .errors import ConfigurationError, NumericalError, StudyError
from .frechet import Panel, Subject, center_panel, default_bandwidth
from .grid import GridMeasure, TransportMap, integrate, unit_grid
from .links import as_link

__all__ = [
    "SimConfig",
    "SimTruth",
    "ImseResult",
    "RNG_NAME",
    "beta_cdf",
    "beta_quantile",
    "generate_truth",
    "imse",
    "run_replication",
    "run_study",
]

RNG_NAME = "numpy.random.PCG64 seeded by SeedSequence(seed).spawn(reps)"


@dataclass(frozen=True)
class SimConfig:
    """Settings of one simulation cell.

    Parameters
    ----------
    n, N : int
        Subjects and observation times per subject.
    m : int or None
        Samples per distribution; ``None`` observes the transports exactly.
    reps : int
    design : {"random", "fixed"}
    K_gen : int
        Number of cosine components of Z.
    link : str
    kappa : float or "common_norm"
        Baseline norm for the dense fit. ``"common_norm"`` uses the known
        norm of the generating baselines.
    bandwidth : float or None
        Covariance bandwidth; ``None`` uses ``bandwidth_c * (n N^2)^(-1/6)``.
    centering : {"uniform", "estimated"}
        Reference measure for the transports: the known uniform base measure
        or the estimated barycenter path.
    baseline_norm : "mean" or float
        Common norm of the baselines: the mean of the unscaled Beta norms of
        the replication, or a fixed value.
    """

    n: int = 100
    N: int = 10
    m: Optional[int] = 50
    reps: int = 50
    design: str = "random"
    K_gen: int = 50
    link: str = "arctan"
    kappa: Union[float, str] = 1.0
    bandwidth: Optional[float] = None
    bandwidth_c: float = 1.0
    M: int = 101
    G: int = 51
    eval_points: int = 51
    J: Optional[int] = None
    fve: float = 0.95
    centering: str = "uniform"
    baseline_norm: Union[str, float] = "mean"
    seed: int = 20240607

    def __post_init__(self):
        for name in ("n", "N", "reps", "K_gen", "M", "G", "eval_points"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
        if self.m is not None and (not isinstance(self.m, (int, np.integer)) or self.m < 1):
            raise ConfigurationError(f"m must be a positive integer or None, got {self.m!r}")
        if self.N < 2:
            raise ConfigurationError("N must be at least 2 for covariance estimation")
        if self.M < 3 or self.G < 3 or self.eval_points < 2:
            raise ConfigurationError("grid sizes too small")
        if self.design not in ("random", "fixed"):
            raise ConfigurationError(f"design must be 'random' or 'fixed', got {self.design!r}")
        if self.centering not in ("uniform", "estimated"):
            raise ConfigurationError(f"centering must be 'uniform' or 'estimated', got {self.centering!r}")
        if isinstance(self.kappa, str):
            if self.kappa != "common_norm":
                raise ConfigurationError(f"kappa must be positive or 'common_norm', got {self.kappa!r}")
        elif not self.kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa!r}")
        if isinstance(self.baseline_norm, str):
            if self.baseline_norm != "mean":
                raise ConfigurationError(f"baseline_norm must be 'mean' or a number, got {self.baseline_norm!r}")
        elif not 0 < self.baseline_norm <= 0.5:
            raise ConfigurationError("a fixed baseline_norm must lie in (0, 1/2]")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise ConfigurationError("bandwidth must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")
        try:
            as_link(self.link)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_mapping(cls, data: dict) -> "SimConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown simulation settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


# Beta quantiles -------------------------------------------------------------


def _beta_cf(a, b, x, max_iter: int = 300, eps: float = 1e-15):
    """Continued fraction of the incomplete beta function, modified Lentz method."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < tiny, tiny, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < eps):
            break
    return h


def beta_cdf(x, a, b) -> np.ndarray:
    """Regularized incomplete beta function ``I_x(a, b)``, broadcasting over inputs."""
    x, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, a, b)))
    out = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0.0) & (x < 1.0)
    if not np.any(inner):
        return out
    xi, ai, bi = x[inner], a[inner], b[inner]
    front = np.exp(-betaln(ai, bi) + ai * np.log(xi) + bi * np.log1p(-xi))
    direct = xi < (ai + 1.0) / (ai + bi + 2.0)
    val = np.empty_like(xi)
    if np.any(direct):
        d = direct
        val[d] = front[d] * _beta_cf(ai[d], bi[d], xi[d]) / ai[d]
    if np.any(~direct):
        r = ~direct
        val[r] = 1.0 - front[r] * _beta_cf(bi[r], ai[r], 1.0 - xi[r]) / bi[r]
    out[inner] = val
    return out


def beta_quantile(p, a, b, tol: float = 1e-10) -> np.ndarray:
    """Quantile of ``Beta(a, b)`` by bisection on :func:`beta_cdf`."""
    p, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (p, a, b)))
    lo = np.zeros(p.shape)
    hi = np.ones(p.shape)
    # 2^-34 < 1e-10
    for _ in range(int(math.ceil(math.log2(1.0 / tol)))):
        mid = 0.5 * (lo + hi)
        below = beta_cdf(mid, a, b) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    q = 0.5 * (lo + hi)
    return np.where(p <= 0.0, 0.0, np.where(p >= 1.0, 1.0, q))


# Truth and sampling ---------------------------------------------------------


@dataclass(frozen=True)
class SimTruth:
    """Continuous-time truth of one replication.

    ``xi`` holds the component scores (n, K), ``baselines`` the rescaled
    baseline transports on the quantile grid (n, M) and ``norm`` their common
    norm.
    """

    xi: np.ndarray
    baselines: np.ndarray
    norm: float
    link: str = "arctan"
    shape: np.ndarray = None

    @property
    def grid_size(self) -> int:
        return self.baselines.shape[1]

    def latent(self, i: int, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return cosine_basis(self.xi.shape[1], t).T @ self.xi[i]

    def multiplier(self, i: int, t) -> np.ndarray:
        return np.asarray(as_link(self.link)(self.latent(i, t)), dtype=float)

    def path(self, i: int, t) -> np.ndarray:
        """True transports ``T_i(t)`` as rows of an array ``(len(t), M)``."""
        return multiplier_path(self.multiplier(i, t), TransportMap(self.baselines[i]))


def cosine_basis(K: int, t) -> np.ndarray:
    """Unnormalized cosines ``cos(2 (k - 1) pi t)``, shape ``(K, len(t))``."""
    k = np.arange(K)[:, None]
    return np.cos(2.0 * np.pi * k * np.atleast_1d(t)[None, :])


def _common_baselines(a, b, M: int, rule):
    u = unit_grid(M)
    Q = beta_quantile(u[None, :], a[:, None], b[:, None])
    Q[:, 0], Q[:, -1] = 0.0, 1.0
    raw_norms = integrate(np.abs(Q - u))
    target = float(raw_norms.mean()) if rule == "mean" else float(rule)
    scaled = u + (target / raw_norms)[:, None] * (Q - u)
    if np.any(np.diff(scaled, axis=1) < -1e-12) or scaled.min() < -1e-12 or scaled.max() > 1 + 1e-12:
        raise NumericalError(f"common baseline norm {target:.4g} is infeasible for some Beta draws")
    scaled = np.maximum.accumulate(np.clip(scaled, 0.0, 1.0), axis=1)
    return scaled, target


def _design_times(config: SimConfig, rng) -> np.ndarray:
    if config.design == "fixed":
        return np.tile(np.arange(1, config.N + 1) / (config.N + 1), (config.n, 1))
    return np.sort(rng.uniform(0.0, 1.0, size=(config.n, config.N)), axis=1)


def generate_truth(config: SimConfig, rng: np.random.Generator):
    """Draw one replication: the observed panel and its truth.

    Returns
    -------
    (Panel, SimTruth)
        Payloads are raw sample vectors, or :class:`TransportMap` when
        ``config.m`` is None.
    """
    n, K, M = config.n, config.K_gen, config.M
    xi = rng.standard_normal((n, K)) / np.arange(1, K + 1)
    a = rng.uniform(3.0, 4.0, size=n)
    b = rng.uniform(1.0, 2.0, size=n)
    baselines, common = _common_baselines(a, b, M, config.baseline_norm)
    truth = SimTruth(xi, baselines, common, config.link, np.column_stack([a, b]))
    times = _design_times(config, rng)
    u = unit_grid(M)

    subjects = []
    for i in range(n):
        paths = truth.path(i, times[i])
        if config.m is None:
            payloads = tuple(TransportMap(row) for row in paths)
        else:
            draws = rng.uniform(0.0, 1.0, size=(config.N, config.m))
            payloads = tuple(np.interp(draws[j], u, paths[j]) for j in range(config.N))
        subjects.append(Subject(f"s{i:04d}", times[i], payloads))
    return Panel(tuple(subjects), design=config.design), truth


def _evaluate(path, times) -> np.ndarray:
    return np.asarray(path(times) if callable(path) else path, dtype=float)


def imse(truth_paths, predicted_paths, times=None) -> float:
    """Subject-averaged integral over time of the d_{W,1} prediction error.

    Parameters
    ----------
    truth_paths, predicted_paths : sequence
        One entry per subject: either a callable ``times -> (len(times), M)``
        array of transports, or that array already evaluated.
    times : array_like, optional
        Evaluation times, default 51 equispaced points on [0, 1].
    """
    times = unit_grid(51) if times is None else np.asarray(times, dtype=float)
    if len(truth_paths) != len(predicted_paths):
        raise ValueError("truth and predictions cover different numbers of subjects")
    per_subject = []
    for tp, pp in zip(truth_paths, predicted_paths):
        T = _evaluate(tp, times)
        P = _evaluate(pp, times)
        if T.shape != P.shape:
            raise ValueError(f"shape mismatch {T.shape} vs {P.shape}")
        err = integrate(np.abs(T - P))
        per_subject.append(trapezoid(err, times) if times.size > 1 else float(err[0]))
    return float(np.mean(per_subject))


@dataclass(frozen=True)
class ImseResult:
    """Aggregated outcome of :func:`run_study`."""

    mean: float
    sd: float
    values: tuple
    config: dict
    wall_time: float
    failures: int = 0
    failure_messages: tuple = ()
    rng: str = RNG_NAME

    def __post_init__(self):
        if self.sd < 0:
            raise ValueError("sd must be non-negative")


def _bandwidth(config: SimConfig, panel: Panel) -> float:
    if config.bandwidth is not None:
        return float(config.bandwidth)
    return default_bandwidth(panel.counts, config.bandwidth_c)


def run_replication(config: SimConfig, rng: np.random.Generator) -> float:
    """Generate, centre, fit the dense model and score one replication."""
    panel, truth = generate_truth(config, rng)
    h = _bandwidth(config, panel)
    if config.centering == "uniform":
        centered = center_panel(panel, M=config.M, reference=GridMeasure.uniform(config.M))
    else:
        centered = center_panel(panel, h=h, M=config.M, G=config.G)
    kappa = truth.norm if config.kappa == "common_norm" else float(config.kappa)
    model = fit_dense(centered, kappa=kappa, h=h, G=config.G, J=config.J, fve=config.fve)
    t_eval = unit_grid(config.eval_points)
    truths = [truth.path(i, t_eval) for i in range(config.n)]
    preds = [predict_dense_path(model, sid, t_eval) for sid in panel.ids]
    return imse(truths, preds, t_eval)


def replication_streams(seed: int, reps: int) -> list:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(reps)]


def run_study(config: SimConfig, max_failure_rate: float = 0.1) -> ImseResult:
    """Run ``config.reps`` independent replications and aggregate their IMSE.

    Replications that raise a numerical error are dropped and counted; more
    than ``max_failure_rate`` of failures raises :class:`StudyError`.
    """
    start = time.perf_counter()
    values, messages = [], []
    for r, rng in enumerate(replication_streams(config.seed, config.reps)):
        try:
            values.append(run_replication(config, rng))
        except NumericalError as exc:
            messages.append(f"rep {r}: {exc}")
    failures = len(messages)
    if failures > max_failure_rate * config.reps or not values:
        raise StudyError(f"{failures} of {config.reps} replications failed: {messages[:3]}")
    arr = np.array(values)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return ImseResult(
        mean=float(math.fsum(values) / len(values)),
        sd=sd,
        values=tuple(values),
        config=config.to_dict(),
        wall_time=time.perf_counter() - start,
        failures=failures,
        failure_messages=tuple(messages),
    )


def sweep(base: SimConfig, **axes) -> list:
    """Configurations for every combination of the given axis values."""
    configs = [base]
    for name, values in axes.items():
        configs = [replace(c, **{name: v}) for c in configs for v in values]
    return configs
