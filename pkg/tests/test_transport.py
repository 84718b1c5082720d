import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otfpca import GridMeasure, TransportMap, equiv_class_distance, geodesic, invert, norm1, optimal_transport, scalar_mult, sign, transport_distance
from otfpca.errors import DegenerateSourceWarning, IncompatibleGridError, InvalidParameterError
from otfpca.grid import integrate, unit_grid
from otfpca.transport import golden_section

from conftest import random_measure, random_transport, transports

M = 101
U = unit_grid(M)
SQUARE = TransportMap(U**2)
ROOT = TransportMap(np.sqrt(U))


def test_transport_between_equal_measures_is_identity(rng):
    a = random_measure(rng, pinned=True)
    T = optimal_transport(a, a)
    assert np.max(np.abs(T.tvals - U)) < 1e-12


def test_transport_from_uniform_is_target_quantile():
    T = optimal_transport(GridMeasure.uniform(M), GridMeasure(U**2))
    assert np.allclose(T.tvals, U**2, atol=1e-15)


def test_transport_to_uniform_from_square_is_root():
    T = optimal_transport(GridMeasure(U**2), GridMeasure.uniform(M))
    assert np.max(np.abs(T.tvals - np.sqrt(U))) < 2 / (M - 1)


def test_transport_pushes_source_to_target():
    u = unit_grid(1001)
    a, b = GridMeasure(0.5 * (u + u**2)), GridMeasure(np.sin(0.5 * np.pi * u))
    T = optimal_transport(a, b)
    assert np.max(np.abs(T(a.qvals) - b.qvals)) < 1e-3


def test_plateau_source_warns():
    q = np.concatenate([np.linspace(0, 0.4, 30), np.full(41, 0.4), np.linspace(0.4, 1, 30)])
    with pytest.warns(DegenerateSourceWarning):
        T = optimal_transport(GridMeasure(q), GridMeasure.uniform(q.size))
    assert np.all(np.diff(T.tvals) >= 0)


def test_transport_grid_mismatch():
    with pytest.raises(IncompatibleGridError):
        optimal_transport(GridMeasure.uniform(5), GridMeasure.uniform(6))


def test_scalar_mult_branches(rng):
    T = random_transport(rng)
    assert scalar_mult(0, T) == TransportMap.identity(M)
    assert scalar_mult(1, T) == T
    assert np.max(np.abs(scalar_mult(-1, T).tvals - invert(T).tvals)) < 1e-15
    assert scalar_mult(0.5, SQUARE)(0.5) == pytest.approx(0.375)


def test_scalar_mult_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        scalar_mult(1.2, SQUARE)


def test_invert_square_is_root():
    assert invert(TransportMap.identity(M)) == TransportMap.identity(M)
    assert np.max(np.abs(invert(SQUARE).tvals - np.sqrt(U))) < 2 / (M - 1)


def test_invert_plateau_jumps():
    u = unit_grid(11)
    t = np.where(u < 0.4, 1.25 * u, np.where(u <= 0.6, 0.5, 0.5 + 1.25 * (u - 0.6)))
    inv = invert(TransportMap(t))
    # the level 0.5 is reached first at v = 0.4
    assert inv(0.5) == pytest.approx(0.4)
    assert inv.tvals[6] - inv.tvals[5] >= 0.2


def test_invert_plateau_at_one_keeps_endpoint():
    u = unit_grid(11)
    t = np.minimum(u / 0.8, 1.0)
    inv = invert(TransportMap(t))
    assert inv.tvals[0] == 0.0 and inv.tvals[-1] == 1.0
    assert inv(0.5) == pytest.approx(0.4)
    assert scalar_mult(-0.5, TransportMap(t)).tvals[-1] == 1.0


@settings(max_examples=40)
@given(transports())
def test_double_inversion_close_to_original(T):
    assert np.max(np.abs(invert(invert(T)).tvals - T.tvals)) < 2 / (T.grid_size - 1)


def test_sign_examples():
    assert sign(TransportMap.identity(M)) == 0
    assert sign(SQUARE) == -1
    assert sign(ROOT) == 1


def test_norm_examples():
    assert norm1(TransportMap.identity(M)) == 0.0
    assert norm1(SQUARE) == pytest.approx(1 / 6, abs=1e-4)


@settings(max_examples=40)
@given(transports(), st.floats(0, 1))
def test_norm_homogeneous_for_positive_scalars(T, a):
    assert norm1(scalar_mult(a, T)) == pytest.approx(a * norm1(T), rel=1e-12, abs=1e-15)


@settings(max_examples=40)
@given(transports())
def test_norm_of_inverse(T):
    assert abs(norm1(T) - norm1(invert(T))) < 2 / (T.grid_size - 1)


def test_transport_distance_examples(rng):
    T = random_transport(rng)
    assert transport_distance(T, T) == 0.0
    assert transport_distance(TransportMap.identity(M), SQUARE) == pytest.approx(1 / 6, abs=1e-4)
    assert abs(transport_distance(invert(T), T) - 2 * norm1(T)) < 4 / (M - 1)


def test_geodesic_endpoints(rng):
    T = random_transport(rng)
    assert geodesic(T, 0.5) == TransportMap.identity(M)
    assert geodesic(T, 1.0) == T
    assert geodesic(T, 0.0) == invert(T)
    with pytest.raises(InvalidParameterError):
        geodesic(T, 1.5)


def test_geodesic_quarter_points(rng):
    T = random_transport(rng)
    full = transport_distance(geodesic(T, 0), geodesic(T, 1))
    half = transport_distance(geodesic(T, 0.25), geodesic(T, 0.75))
    assert abs(half - 0.5 * full) < 5 / (M - 1)


@settings(max_examples=60)
@given(transports(M=101), st.one_of(st.just(0.0), st.floats(1e-9, 1), st.floats(-1, -1e-9)))
def test_sign_multiplicative(T, a):
    # a near-zero net displacement can flip under inversion by O(1/M^2);
    # |a| below ~1e-16 rounds a (.) T to the identity
    if abs(integrate(T.displacement())) < 1e-3:
        return
    assert sign(scalar_mult(a, T)) == int(np.sign(a)) * sign(T)


def test_equivalence_class_examples(rng):
    T = random_transport(rng)
    assert equiv_class_distance(scalar_mult(0.3, T), T) < 1e-6
    assert equiv_class_distance(T, T) < 1e-12
    assert equiv_class_distance(TransportMap.identity(M), T) < 1e-12


@settings(max_examples=30)
@given(transports(), st.floats(0.01, 1), st.floats(0.01, 1))
def test_equivalence_transitive(C, a, b):
    B = scalar_mult(b, C)
    A = scalar_mult(a, B)
    assert equiv_class_distance(A, C) < 1e-6


def test_equivalence_distance_positive_for_unrelated_maps():
    assert equiv_class_distance(SQUARE, ROOT) > 0.1


def test_golden_section_finds_interior_minimum():
    x, fx = golden_section(lambda a: (a - 0.3) ** 2, 0, 1, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx < 1e-12
