import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bosonpow.errors import ConfigError, DimensionError, SingularityError, SymmetryError
from bosonpow.linalg import (EstimatorConfig, det_and_inverse, glynn_estimator, gurvits_sample_count,
                             haar_unitary, hafnian_exact, matrix_from_json, matrix_to_json, permanent_exact,
                             permanent_gurvits)
from oracles import det_cofactor, hafnian_permutations, permanent_naive, random_complex


def test_permanent_small_cases():
    assert permanent_exact(np.eye(2)) == 1
    assert permanent_exact(np.ones((2, 2))) == 2
    for n in range(1, 7):
        assert permanent_exact(np.ones((n, n))).real == pytest.approx(math.factorial(n))
    assert permanent_exact(np.zeros((0, 0))) == 1


def test_permanent_matches_naive(rng):
    A = random_complex(rng, 4)
    assert abs(permanent_exact(A) - permanent_naive(A)) <= 1e-10 * abs(permanent_naive(A))


def test_permanent_rejects_non_square():
    with pytest.raises(DimensionError):
        permanent_exact(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
def test_permanent_invariant_under_permutations(seed, n):
    rng = np.random.default_rng(seed)
    A = random_complex(rng, n)
    P = np.eye(n)[rng.permutation(n)]
    Q = np.eye(n)[rng.permutation(n)]
    ref = permanent_exact(A)
    assert abs(permanent_exact(P @ A @ Q) - ref) <= 1e-9 * max(1.0, abs(ref))


def test_glynn_estimator_examples():
    assert glynn_estimator(np.eye(2), [1, 1]) == 1
    assert glynn_estimator(np.eye(2), [1, -1]) == 1
    with pytest.raises(DimensionError):
        glynn_estimator(np.eye(2), [1, 1, 1])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_glynn_exhaustive_mean_is_permanent(n):
    A = random_complex(np.random.default_rng(n), n)
    mean = np.mean([glynn_estimator(A, x) for x in itertools.product([1, -1], repeat=n)])
    assert abs(mean - permanent_exact(A)) <= 1e-10


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 5))
def test_glynn_bounded_for_unitary(seed, n):
    U = haar_unitary(n, seed)
    for x in itertools.product([1, -1], repeat=n):
        assert abs(glynn_estimator(U, x)) <= 1 + 1e-12


def test_gurvits_sample_count():
    assert gurvits_sample_count(0.1, 0.99) == math.ceil(200 * math.log(200)) == 1060
    assert EstimatorConfig(0.1).samples == 1060
    with pytest.raises(ConfigError):
        EstimatorConfig(0.0)
    with pytest.raises(ConfigError):
        EstimatorConfig(0.1, confidence=1.0)


def test_gurvits_degenerate_and_identity():
    est, m = permanent_gurvits(np.array([[0.5]]), EstimatorConfig(0.1, seed=3))
    assert est == 0.5 and m == 1060
    hits = sum(abs(permanent_gurvits(np.eye(3), EstimatorConfig(0.05, 0.99, s))[0] - 1) <= 0.05 for s in range(100))
    assert hits >= 99


def test_gurvits_is_seed_deterministic():
    A = haar_unitary(4, 2)
    assert permanent_gurvits(A, EstimatorConfig(0.2, seed=9)) == permanent_gurvits(A, EstimatorConfig(0.2, seed=9))


def test_hafnian_examples():
    a, b, c = 2.0, 3.0 + 1j, -1.0
    assert hafnian_exact(np.array([[a, b], [b, c]])) == b
    rng = np.random.default_rng(4)
    X = random_complex(rng, 4)
    B = X + X.T
    expect = B[0, 1] * B[2, 3] + B[0, 2] * B[1, 3] + B[0, 3] * B[1, 2]
    assert abs(hafnian_exact(B) - expect) < 1e-12
    assert hafnian_exact(np.ones((3, 3))) == 0
    assert hafnian_exact(np.zeros((0, 0))) == 1


def test_hafnian_matches_permutation_formula():
    X = random_complex(np.random.default_rng(6), 6)
    B = X + X.T
    assert abs(hafnian_exact(B) - hafnian_permutations(B)) <= 1e-10 * abs(hafnian_permutations(B))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_hafnian_all_ones_is_double_factorial(k):
    assert hafnian_exact(np.ones((2 * k, 2 * k))).real == pytest.approx(math.prod(range(2 * k - 1, 0, -2)))


def test_hafnian_rejects_asymmetric():
    with pytest.raises(SymmetryError):
        hafnian_exact(np.array([[0, 1], [2, 0]]))


def test_haar_unitary_properties():
    u1 = haar_unitary(1, 5)
    assert abs(abs(u1[0, 0]) - 1) < 1e-12
    U = haar_unitary(8, 42)
    assert np.array_equal(U, haar_unitary(8, 42))
    assert np.allclose(np.linalg.norm(U, axis=0), 1, atol=1e-12, rtol=0)
    assert np.allclose(U.conj().T @ U, np.eye(8), atol=1e-12, rtol=0)
    with pytest.raises(DimensionError):
        haar_unitary(0, 1)


def test_haar_phases_are_uniform():
    # the top-left entry's phase is uniform on the circle for a Haar unitary
    phases = np.array([np.angle(haar_unitary(3, s)[0, 0]) for s in range(2000)])
    counts, _ = np.histogram(phases, bins=8, range=(-np.pi, np.pi))
    assert np.all(np.abs(counts - 250) < 5 * math.sqrt(250))


def test_det_and_inverse():
    det, inv = det_and_inverse(np.eye(4))
    assert det == 1 and np.allclose(inv, np.eye(4))
    assert det_and_inverse(np.diag([2.0, 3.0]))[0] == pytest.approx(6)
    A = random_complex(np.random.default_rng(5), 5)
    det, inv = det_and_inverse(A)
    assert abs(det - det_cofactor(A)) <= 1e-9 * abs(det)
    assert np.allclose(A @ inv, np.eye(5), atol=1e-9)
    with pytest.raises(SingularityError):
        det_and_inverse(np.ones((3, 3)))


def test_matrix_json_round_trip():
    A = random_complex(np.random.default_rng(1), 2, 3)
    doc = matrix_to_json(A)
    assert doc["rows"] == 2 and doc["cols"] == 3 and len(doc["re"]) == 6
    assert np.array_equal(matrix_from_json(doc), A)
