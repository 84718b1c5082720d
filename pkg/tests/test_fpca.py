import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from otfpca import AnalyticBasis, CovarianceSurface, EigenSystem, KernelSpec, LinkFunction, TransportMap
from otfpca import dense_scores, eigendecompose, pace_scores, raw_scores, scalar_mult, select_components, smooth_covariance
from otfpca.errors import ConditioningError, InvalidInputError, InvalidParameterError, NotEstimableError
from otfpca.fpca import CLAMP_EPS, covariance_at
from otfpca.grid import trapezoid_weights, unit_grid
from otfpca.transport import norm1

from conftest import random_transport
from oracles import pairs_oracle as _pairs_oracle

LINKS = ["arctan", "algebraic", "logistic"]


@pytest.mark.parametrize("name", ["epanechnikov", "uniform", "triweight"])
def test_kernels_are_densities(name):
    k = KernelSpec(name)
    mass = quad(lambda x: float(k(x, 0.3)), -0.3, 0.3)[0]
    assert mass == pytest.approx(1.0, abs=1e-10)
    assert k(0.31, 0.3) == 0.0


def test_unknown_kernel_and_link():
    with pytest.raises(InvalidParameterError):
        KernelSpec("gauss")
    with pytest.raises(InvalidParameterError):
        LinkFunction("probit")


@pytest.mark.parametrize("name", LINKS)
def test_link_roundtrip_and_oddness(name):
    g = LinkFunction(name)
    y = np.linspace(-1 + 1e-6, 1 - 1e-6, 2001)
    assert np.max(np.abs(g(g.inverse(y)) - y)) < 1e-12
    # beyond |x| ~ 37 tanh(x / 2) rounds to 1 in double precision
    x = np.linspace(-20, 20, 1001)
    assert np.array_equal(g(-x), -g(x))
    assert np.all(np.abs(g(x)) < 1)


def test_link_closed_forms():
    x = np.array([-3.0, -0.2, 0.7, 4.0])
    assert np.allclose(LinkFunction("algebraic")(x), (np.sqrt(1 + 4 * x**2) - 1) / (2 * x), rtol=1e-14)
    assert np.allclose(LinkFunction("logistic")(x), (np.exp(x) - 1) / (np.exp(x) + 1), rtol=1e-14)
    assert LinkFunction("algebraic")(0.0) == 0.0
    assert LinkFunction("arctan")(1.0) == pytest.approx(0.5)


def test_raw_scores_examples(rng):
    T0 = random_transport(rng)
    if norm1(T0) == 0:
        pytest.skip("degenerate draw")
    nrm = norm1(T0)
    sgn = 1 if np.sum(T0.displacement()) > 0 else -1
    out = raw_scores([0.1, 0.4, 0.8], [TransportMap.identity(101), T0, scalar_mult(0.5, T0)], norm_T0=nrm, link="arctan", kappa=2.0)
    assert out.u[0] == 0.0 and out.z[0] == 0.0
    assert out.u[1] == sgn * (1 - CLAMP_EPS)
    assert out.u[2] == pytest.approx(sgn * 0.5, abs=1e-14)
    assert out.z[2] == pytest.approx(sgn * 1.0, abs=1e-12)
    assert out.scaled[1] == pytest.approx(sgn * nrm / 2.0)
    with pytest.raises(InvalidParameterError):
        raw_scores([0.1], [T0], norm_T0=0.0)


def test_smoother_reproduces_constants(rng):
    raw = [(np.sort(rng.uniform(size=5)), np.full(5, np.sqrt(2.5))) for _ in range(40)]
    surface = smooth_covariance(raw, h=0.3, G=21)
    assert np.max(np.abs(surface.values - 2.5)) < 1e-10


def test_smoother_matches_explicit_pairs(rng):
    raw = []
    for _ in range(60):
        t = np.sort(rng.uniform(size=int(rng.integers(2, 7))))
        raw.append((t, t * (1 + 0.1 * rng.standard_normal(t.size))))
    surface = smooth_covariance(raw, h=0.25, G=11)
    g = unit_grid(11)
    for a, b in [(0, 0), (2, 7), (5, 5), (9, 3), (10, 10)]:
        expect = _pairs_oracle(raw, g[a], g[b], 0.25)
        assert surface.values[a, b] == pytest.approx(expect, abs=1e-10)


def test_smoother_tracks_product_surface(rng):
    raw = [(np.sort(rng.uniform(size=10)),) for _ in range(400)]
    raw = [(t, t) for (t,) in raw]
    surface = smooth_covariance(raw, h=0.1, G=11)
    g = unit_grid(11)
    assert np.max(np.abs(surface.values - np.outer(g, g))) < 0.02


def test_single_pair_recovers_product():
    t1, t2, v1, v2 = 0.3, 0.6, 0.8, -0.5
    beta, identified = covariance_at([([t1, t2], [v1, v2])], t1, t2, h=0.2)
    assert beta[0] == pytest.approx(v1 * v2, abs=1e-12)
    # one pair sits at the centre of the window: intercept known, slopes not
    assert identified
    with pytest.raises(NotEstimableError):
        smooth_covariance([([t1, t2], [v1, v2])], h=0.2, G=5)


def test_two_subject_toy_matches_hand_solved_least_squares():
    raw = [([0.2, 0.45, 0.7], [0.3, -0.1, 0.25]), ([0.3, 0.5, 0.65], [0.2, 0.15, -0.3])]
    beta, identified = covariance_at(raw, 0.4, 0.55, h=0.3)
    assert identified
    assert beta[0] == pytest.approx(_pairs_oracle(raw, 0.4, 0.55, 0.3), abs=1e-12)


def test_short_subjects_are_skipped_with_warning(rng):
    raw = [(np.sort(rng.uniform(size=4)), np.ones(4)) for _ in range(20)] + [([0.5], [3.0])]
    with pytest.warns(UserWarning, match="skipped"):
        surface = smooth_covariance(raw, h=0.4, G=5)
    # the skipped subject still counts in n, so the level is 20/21 of the constant
    assert np.allclose(surface.values, 1.0, atol=1e-10)


def test_eigen_of_constant_surface():
    eig = eigendecompose(CovarianceSurface(np.full((21, 21), 2.0)), K=3)
    assert eig.values[0] == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(eig.functions[0], 1.0, atol=1e-12)
    assert np.allclose(eig.values[1:], 0.0, atol=1e-12)


def _cosine_surface(G, K=3):
    g = unit_grid(G)
    phi = np.array([np.ones(G)] + [np.sqrt(2) * np.cos(2 * k * np.pi * g) for k in range(1, K)])
    lam = 1.0 / np.arange(1, K + 1) ** 2
    return CovarianceSurface((phi.T * lam) @ phi), lam, phi


def test_eigen_recovers_cosine_expansion():
    surface, lam, phi = _cosine_surface(51)
    eig = eigendecompose(surface, K=3)
    assert np.max(np.abs(eig.values - lam)) < 1e-6
    for k in range(3):
        assert min(np.max(np.abs(eig.functions[k] - phi[k])), np.max(np.abs(eig.functions[k] + phi[k]))) < 1e-6
    assert eig.orthonormality_residual() < 1e-8


def test_eigen_trace_identity(rng):
    X = rng.standard_normal((30, 41))
    C = X.T @ X / 30
    eig = eigendecompose(CovarianceSurface(C))
    assert eig.values.sum() == pytest.approx(np.dot(np.diag(C), trapezoid_weights(41)), abs=1e-8)
    assert eig.orthonormality_residual() < 1e-8


def test_eigen_sign_convention(rng):
    X = rng.standard_normal((10, 31))
    eig = eigendecompose(CovarianceSurface(X.T @ X), K=5)
    integrals = eig.functions @ trapezoid_weights(31)
    assert np.all(integrals >= -1e-10)


def test_eigen_errors():
    with pytest.raises(InvalidParameterError):
        eigendecompose(CovarianceSurface(np.eye(4)), K=5)
    with pytest.raises(InvalidInputError):
        CovarianceSurface(np.array([[1.0, 0.5], [0.4, 1.0]]))


def test_select_components():
    assert select_components([1.0, 0.25, 0.11, 0.0625], fve=0.8) == 2
    assert select_components([1.0, 0.0, 0.0], fve=0.95) == 1
    assert select_components(np.ones(30), fve=0.99, cap=20) == 20
    assert select_components([0.0, 0.0]) == 1


def test_dense_scores_examples(rng):
    surface, lam, phi = _cosine_surface(101)
    eig = eigendecompose(surface, K=3)
    assert np.all(dense_scores([0.1, 0.3], [0.0, 0.0], eig, 3) == 0)
    t = rng.uniform(size=10_000)
    xi = dense_scores(t, eig(t)[0], eig, 2)
    assert xi[0] == pytest.approx(1.0, abs=0.05)
    assert xi[1] == pytest.approx(0.0, abs=0.05)
    single = dense_scores([0.37], [2.0], eig, 3)
    assert np.allclose(single, 2.0 * eig([0.37])[:, 0])
    with pytest.raises(InvalidParameterError):
        dense_scores(t, t, eig, 4)


@settings(max_examples=25)
@given(st.floats(0.05, 5.0))
def test_dense_scores_scale_with_kappa(kappa):
    surface, _, _ = _cosine_surface(21)
    eig = eigendecompose(surface, K=3)
    t = np.array([0.1, 0.35, 0.8])
    v = np.array([0.2, -0.1, 0.05])
    assert np.allclose(dense_scores(t, v / kappa, eig, 3), dense_scores(t, v, eig, 3) / kappa, rtol=1e-13)


def _two_component_basis():
    return AnalyticBasis([1.0, 0.25], [lambda t: np.ones_like(t), lambda t: np.sqrt(2) * np.cos(2 * np.pi * t)])


def test_pace_rank_one_single_observation():
    psi = lambda t: np.sqrt(2) * np.sin(np.pi * t)
    basis = AnalyticBasis([0.7], [psi])
    chi = pace_scores([0.3], [1.5], basis.values, basis, basis.covariance)
    assert chi[0] == pytest.approx(1.5 / psi(0.3), rel=1e-14)


def test_pace_zero_observations_give_zero_scores():
    basis = _two_component_basis()
    assert np.all(pace_scores([0.1, 0.5], [0.0, 0.0], basis.values, basis, basis.covariance) == 0)


def test_pace_degenerate_covariance_gives_zero():
    zero = lambda s, t: np.zeros((np.size(s), np.size(t)))
    basis = AnalyticBasis([0.0], [lambda t: np.ones_like(t)])
    assert pace_scores([0.1, 0.5], [0.0, 0.0], basis.values, basis, zero)[0] == 0.0


def test_pace_permutation_and_linearity():
    basis = AnalyticBasis(
        [1.0, 0.25, 0.1, 0.05],
        [lambda t, k=k: np.sqrt(2) * np.cos(np.pi * k * t) if k else np.ones_like(t) for k in range(4)],
    )
    t = np.array([0.1, 0.45, 0.8])
    z = np.array([0.3, -1.2, 0.5])
    base = pace_scores(t, z, basis.values, basis, basis.covariance)
    perm = [2, 0, 1]
    assert np.allclose(pace_scores(t[perm], z[perm], basis.values, basis, basis.covariance), base, atol=1e-13)
    assert np.allclose(pace_scores(t, 3.5 * z, basis.values, basis, basis.covariance), 3.5 * base, rtol=1e-13)


def test_pace_duplicate_times():
    basis = _two_component_basis()
    with pytest.raises(InvalidInputError):
        pace_scores([0.2, 0.2], [1.0, 1.0], basis.values, basis, basis.covariance)


def test_pace_singular_covariance_uses_ridge(rng):
    # two components observed at three times: Sigma has rank 2
    basis = _two_component_basis()
    t = np.array([0.15, 0.5, 0.9])
    xi = np.array([0.8, -0.3])
    z = basis.reconstruct(xi, t)
    chi = pace_scores(t, z, basis.values, basis, basis.covariance)
    sigma = basis.covariance(t, t)
    expect = basis.values * (basis(t) @ np.linalg.pinv(sigma) @ z)
    assert np.max(np.abs(chi - expect)) < 1e-6


def test_pace_unsalvageable_covariance():
    broken = lambda s, t: np.full((np.size(s), np.size(t)), np.nan)
    basis = AnalyticBasis([1.0], [lambda t: np.ones_like(t)])
    with pytest.raises(ConditioningError):
        pace_scores([0.1, 0.2], [1.0, 1.0], basis.values, basis, broken)


def test_eigen_system_validation():
    with pytest.raises(InvalidInputError):
        EigenSystem([0.1, 0.5], np.zeros((2, 5)))
