import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otfpca import GridMeasure, Panel, Subject, TransportMap, center_panel, cross_sectional_mean, invert, local_frechet_mean, mean_transport, measure_to_transport, scalar_mult
from otfpca.errors import ConfigurationError, InsufficientDataError, InvalidInputError
from otfpca.frechet import default_bandwidth, local_frechet_weights
from otfpca.grid import unit_grid
from otfpca.measures import empirical_quantile
from otfpca.simulation import SimConfig, generate_truth

from conftest import random_measure, random_transport

M = 101
U = unit_grid(M)


def test_cross_sectional_mean_examples(rng):
    a = random_measure(rng)
    assert cross_sectional_mean([a, a, a]) == a
    out = cross_sectional_mean([GridMeasure(U), GridMeasure(U**2)])
    assert np.allclose(out.qvals, (U + U**2) / 2, atol=1e-16)


def test_mean_of_reflected_pair_is_uniform():
    bump = 0.2 * np.sin(np.pi * U)
    out = cross_sectional_mean([GridMeasure(U + bump), GridMeasure(U - bump)])
    assert np.max(np.abs(out.qvals - U)) < 1e-15


def test_empty_means_rejected():
    with pytest.raises(InvalidInputError):
        cross_sectional_mean([])
    with pytest.raises(InvalidInputError):
        mean_transport([])


def test_mean_transport_examples(rng):
    T = random_transport(rng)
    assert mean_transport([T]) == T
    half = mean_transport([TransportMap.identity(M), T])
    assert np.allclose(half.tvals, scalar_mult(0.5, T).tvals, atol=1e-15)
    sq = TransportMap(U**2)
    pair = mean_transport([sq, invert(sq)])
    assert np.max(np.abs(pair.tvals - (U**2 + np.sqrt(U)) / 2)) < 1 / (M - 1)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.randoms())
def test_mean_transport_permutation_invariant(seed, r):
    rng = np.random.default_rng(seed)
    maps = [random_transport(rng, 21) for _ in range(4)]
    shuffled = list(maps)
    r.shuffle(shuffled)
    assert np.allclose(mean_transport(maps).tvals, mean_transport(shuffled).tvals, atol=1e-15)


def test_mean_commutes_with_transport_embedding(rng):
    ms = [random_measure(rng, pinned=True) for _ in range(5)]
    lhs = measure_to_transport(cross_sectional_mean(ms))
    rhs = mean_transport([measure_to_transport(m) for m in ms])
    assert np.max(np.abs(lhs.tvals - rhs.tvals)) < 1e-15


def _panel(times_list, payload_fn):
    subjects = [Subject(f"s{i}", ts, tuple(payload_fn(t) for t in ts)) for i, ts in enumerate(times_list)]
    return Panel(tuple(subjects), design="random")


def test_local_weights_moment_conditions(rng):
    times = [np.sort(rng.uniform(size=int(rng.integers(2, 6)))) for _ in range(30)]
    for t in (0.0, 0.13, 0.5, 0.97):
        w = local_frechet_weights(times, t, 0.2)
        flat_w = np.concatenate(w)
        flat_t = np.concatenate(times)
        assert abs(flat_w.sum() - 1) < 1e-10
        assert abs(np.dot(flat_w, flat_t - t)) < 1e-10


def test_local_mean_of_constant_panel(rng):
    mu = random_measure(rng)
    times = [np.sort(rng.uniform(size=4)) for _ in range(15)]
    panel = _panel(times, lambda t: mu)
    for t in (0.05, 0.5, 0.9):
        assert np.max(np.abs(local_frechet_mean(panel, t, 0.25).qvals - mu.qvals)) < 1e-12


def _wls_oracle(times, values, counts, t, h):
    """Direct weighted least squares for a local line at t, per quantile level."""
    n = len(counts)
    d = times - t
    k = np.where(np.abs(d / h) <= 1, 0.75 * (1 - (d / h) ** 2) / h, 0.0)
    w = k / (n * counts)
    X = np.column_stack([np.ones_like(d), d])
    sw = np.sqrt(w)
    beta = np.linalg.lstsq(X * sw[:, None], values * sw[:, None], rcond=None)[0]
    return beta[0]


def test_local_mean_matches_weighted_least_squares(rng):
    times = [np.sort(rng.uniform(size=int(rng.integers(2, 6)))) for _ in range(40)]

    def payload(t):
        # quantile curve moving nonlinearly in t, monotone in the level
        return GridMeasure(U ** (1 + 0.5 * t + 0.3 * t * t))

    panel = _panel(times, payload)
    flat = np.concatenate(times)
    counts = np.concatenate([np.full(ts.size, ts.size) for ts in times])
    values = np.vstack([payload(t).qvals for t in flat])
    for t, h in [(0.5, 0.2), (0.3, 0.35)]:
        est = local_frechet_mean(panel, t, h).qvals
        assert np.max(np.abs(est - _wls_oracle(flat, values, counts, t, h))) < 1e-12


def test_local_mean_reproduces_linear_trend(rng):
    times = [np.sort(rng.uniform(size=3)) for _ in range(50)]
    lo, hi = U**2, np.sqrt(U)
    panel = _panel(times, lambda t: GridMeasure((1 - t) * lo + t * hi))
    est = local_frechet_mean(panel, 0.4, 0.2)
    assert np.max(np.abs(est.qvals - (0.6 * lo + 0.4 * hi))) < 1e-12


def test_wide_bandwidth_approaches_cross_sectional_mean(rng):
    times = np.linspace(0.1, 0.9, 5)
    measures = [random_measure(rng) for _ in range(20)]
    subjects = [Subject(f"s{i}", times, tuple(measures[(i + j) % 20] for j in range(5))) for i in range(20)]
    panel = Panel(tuple(subjects), design="random")
    est = local_frechet_mean(panel, 0.5, 10.0)
    all_m = [p for s in panel for p in s.payloads]
    assert np.max(np.abs(est.qvals - cross_sectional_mean(all_m).qvals)) < 1e-3


def test_local_mean_reports_empty_window():
    panel = _panel([np.array([0.1, 0.2]), np.array([0.15, 0.25])], lambda t: GridMeasure.uniform(11))
    with pytest.raises(InsufficientDataError) as info:
        local_frechet_mean(panel, 0.9, 0.1, M=11)
    assert info.value.window == pytest.approx((0.8, 1.0))


def test_local_mean_output_is_monotone_near_boundary(rng):
    times = [np.sort(rng.uniform(size=3)) for _ in range(30)]
    panel = _panel(times, lambda t: random_measure(rng, 21))
    est = local_frechet_mean(panel, 0.0, 0.3, M=21)
    assert np.all(np.diff(est.qvals) >= 0)
    assert est.qvals.min() >= 0 and est.qvals.max() <= 1


def test_center_panel_needs_bandwidth_for_random_design():
    panel = _panel([np.array([0.1, 0.5])], lambda t: GridMeasure.uniform(11))
    with pytest.raises(ConfigurationError):
        center_panel(panel)


def test_centering_at_the_barycenter_gives_identity(rng):
    mu = random_measure(rng, pinned=True)
    panel = Panel((Subject("a", [0.2, 0.6], (mu, mu)),), design="fixed")
    out = center_panel(panel)
    for T in out.subjects[0].payloads:
        assert np.max(np.abs(T.tvals - U)) < 1e-12
    assert out.barycenter is not None


def test_symmetric_pair_gives_inverse_transports():
    bump = 0.02 * np.sin(np.pi * U)
    times = [0.25, 0.75]
    panel = Panel(
        (
            Subject("up", times, (GridMeasure(U + bump),) * 2),
            Subject("down", times, (GridMeasure(U - bump),) * 2),
        ),
        design="fixed",
    )
    out = center_panel(panel)
    T_up = out.subject("up").payloads[0]
    T_down = out.subject("down").payloads[0]
    assert np.max(np.abs(invert(T_up).tvals - T_down.tvals)) < 2 / (M - 1)


def test_known_uniform_reference_returns_empirical_quantiles():
    panel, _ = generate_truth(SimConfig(n=4, N=3, m=25), np.random.default_rng(5))
    out = center_panel(panel, reference=GridMeasure.uniform(M))
    for s_in, s_out in zip(panel, out):
        for x, T in zip(s_in.payloads, s_out.payloads):
            q = empirical_quantile(x, M).qvals.copy()
            q[0], q[-1] = 0.0, 1.0
            assert np.max(np.abs(T.tvals - q)) < 1e-15


def test_random_design_centering_runs(rng):
    times = [np.sort(rng.uniform(size=4)) for _ in range(25)]
    panel = _panel(times, lambda t: rng.beta(2 + t, 2, size=30))
    out = center_panel(panel, h=0.3, G=11)
    assert len(out.barycenter.measures) == 11
    assert all(isinstance(T, TransportMap) for s in out for T in s.payloads)


def test_default_bandwidth():
    assert default_bandwidth([4] * 100) == pytest.approx((100 * 16) ** (-1 / 6))


def test_subject_validation():
    with pytest.raises(InvalidInputError):
        Subject("x", [0.2, 0.2], (None, None))
    with pytest.raises(InvalidInputError):
        Subject("x", [1.2], (None,))
    with pytest.raises(InvalidInputError):
        Panel((Subject("a", [0.1], (1,)), Subject("a", [0.2], (1,))))
