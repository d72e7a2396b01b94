import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmeasure.errors import DimensionError, HermiticityError
from opmeasure.linalg import (
    cluster_eigenvalues,
    devectorize,
    hermitian_eigensystem,
    is_hermitian,
    is_positive_semidefinite,
    is_projection,
    is_unitary,
    partial_trace,
    permute_subsystems,
    sandwich_rep,
    tensor_product,
    transpose_permutation,
    vectorize,
)
from opmeasure.sampling import ginibre, random_density, random_hermitian, random_unitary

from conftest import BELL, PAULI_X, PAULI_Z


def kron_by_index(a, b):
    # (A (x) B)[i*p + k, j*q + l] = A[i, j] B[k, l]
    m, n = a.shape
    p, q = b.shape
    out = np.zeros((m * p, n * q), dtype=complex)
    for i, j, k, l in itertools.product(range(m), range(n), range(p), range(q)):
        out[i * p + k, j * q + l] = a[i, j] * b[k, l]
    return out


def partial_trace_by_sum(m, d1, d2, keep):
    out = np.zeros((d1, d1) if keep == 0 else (d2, d2), dtype=complex)
    for i, j, k in itertools.product(range(d1 if keep == 0 else d2),
                                     range(d1 if keep == 0 else d2),
                                     range(d2 if keep == 0 else d1)):
        if keep == 0:
            out[i, j] += m[i * d2 + k, j * d2 + k]
        else:
            out[i, j] += m[k * d2 + i, k * d2 + j]
    return out


def test_identity_tensor_identity():
    np.testing.assert_array_equal(tensor_product(np.eye(2), np.eye(2)), np.eye(4))


@pytest.mark.parametrize("a,b", [
    (PAULI_Z, np.eye(2)),
    (np.diag([1, 0]), np.diag([0, 1])),
    (np.arange(6).reshape(2, 3), np.arange(4).reshape(2, 2) + 1j),
])
def test_tensor_product_matches_index_formula(a, b):
    np.testing.assert_allclose(tensor_product(a, b), kron_by_index(np.asarray(a), np.asarray(b)))


def test_tensor_product_single_entry():
    out = tensor_product(np.diag([1, 0]), np.diag([0, 1]))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    np.testing.assert_array_equal(out, expected)


@pytest.mark.parametrize("p,q", [(2, 2), (2, 3), (3, 2)])
def test_mixed_product(rng, p, q):
    a, c = ginibre(p, p, rng), ginibre(p, p, rng)
    b, d = ginibre(q, q, rng), ginibre(q, q, rng)
    lhs = tensor_product(a, b) @ tensor_product(c, d)
    assert np.abs(lhs - tensor_product(a @ c, b @ d)).max() <= 1e-10


def test_tensor_product_associative(rng):
    a, b, c = ginibre(2, 2, rng), ginibre(3, 2, rng), ginibre(2, 3, rng)
    np.testing.assert_allclose(tensor_product(tensor_product(a, b), c),
                               tensor_product(a, tensor_product(b, c)))


@pytest.mark.parametrize("d1,d2", [(2, 2), (2, 3), (3, 2), (3, 4)])
def test_partial_trace_of_product(rng, d1, d2):
    rho = random_density(d1, rng)
    sigma = ginibre(d2, d2, rng)
    both = np.kron(rho, sigma)
    assert np.abs(partial_trace(both, [d1, d2], 0) - np.trace(sigma) * rho).max() <= 1e-10
    assert np.abs(partial_trace(both, [d1, d2], 1) - np.trace(rho) * sigma).max() <= 1e-10


@pytest.mark.parametrize("d1,d2,keep", [(2, 3, 0), (2, 3, 1), (3, 3, 0), (4, 2, 1)])
def test_partial_trace_matches_explicit_sum(rng, d1, d2, keep):
    m = ginibre(d1 * d2, d1 * d2, rng)
    np.testing.assert_allclose(partial_trace(m, [d1, d2], keep),
                               partial_trace_by_sum(m, d1, d2, keep), atol=1e-12)


def test_partial_trace_bell_state():
    bell = np.outer(BELL, BELL)
    np.testing.assert_allclose(partial_trace(bell, [2, 2], 0), np.eye(2) / 2, atol=1e-15)


def test_partial_trace_three_factors(rng):
    a, b, c = random_density(2, rng), random_density(3, rng), random_density(2, rng)
    m = tensor_product(a, b, c)
    np.testing.assert_allclose(partial_trace(m, [2, 3, 2], [0, 2]), np.kron(a, c), atol=1e-12)
    np.testing.assert_allclose(partial_trace(m, [2, 3, 2], 1), b, atol=1e-12)


def test_partial_trace_moves_probe_operator_around(rng):
    d, k = 2, 3
    x = ginibre(k, k, rng)
    y = ginibre(d * k, d * k, rng)
    ix = np.kron(np.eye(d), x)
    np.testing.assert_allclose(partial_trace(ix @ y, [d, k], 0),
                               partial_trace(y @ ix, [d, k], 0), atol=1e-12)


def test_partial_trace_preserves_trace(rng):
    m = ginibre(6, 6, rng)
    assert abs(np.trace(partial_trace(m, [2, 3], 1)) - np.trace(m)) < 1e-12


@pytest.mark.parametrize("dims", [[2, 3], [3, 2], [5]])
def test_partial_trace_dimension_mismatch(dims):
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), dims, 0)


def test_permute_subsystems_swaps_factors(rng):
    a, b, c = ginibre(2, 2, rng), ginibre(3, 3, rng), ginibre(2, 2, rng)
    np.testing.assert_allclose(permute_subsystems(tensor_product(a, b, c), [2, 3, 2], [2, 0, 1]),
                               tensor_product(c, a, b))
    u, v = ginibre(2, 1, rng)[:, 0], ginibre(3, 1, rng)[:, 0]
    np.testing.assert_allclose(permute_subsystems(np.kron(u, v), [2, 3], [1, 0]), np.kron(v, u))


def test_eigensystem_diagonal():
    vals, vecs = hermitian_eigensystem(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(vals, [3, 2, 1])
    np.testing.assert_allclose(np.abs(vecs), np.eye(3)[:, [0, 2, 1]], atol=1e-15)


def test_eigensystem_pauli_x():
    vals, vecs = hermitian_eigensystem(PAULI_X)
    np.testing.assert_allclose(vals, [1, -1], atol=1e-15)
    np.testing.assert_allclose(vecs[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(vecs[:, 1], np.array([1, -1]) / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("d", [2, 3, 4, 6])
def test_eigensystem_reconstructs(rng, d):
    h = random_hermitian(d, rng)
    vals, vecs = hermitian_eigensystem(h)
    assert np.all(np.diff(vals) <= 0)
    assert np.abs(vecs @ np.diag(vals) @ vecs.conj().T - h).max() <= 1e-9
    assert np.abs(vecs.conj().T @ vecs - np.eye(d)).max() <= 1e-10
    # the phase convention makes the first significant component real positive
    for j in range(d):
        col = vecs[:, j]
        lead = col[np.argmax(np.abs(col) > 1e-8)]
        assert abs(lead.imag) < 1e-12 and lead.real > 0


def test_eigensystem_is_deterministic(rng):
    h = random_hermitian(4, rng)
    a, b = hermitian_eigensystem(h), hermitian_eigensystem(h.copy())
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_eigensystem_rejects_non_hermitian():
    with pytest.raises(HermiticityError):
        hermitian_eigensystem(np.array([[0, 1], [0, 0]]))


def test_cluster_eigenvalues():
    assert cluster_eigenvalues([2.0, 2.0 + 1e-9, 1.0, 1.0 - 5e-8, 0.0]) == [[0, 1], [2, 3], [4]]
    assert cluster_eigenvalues([1.0, 1.0 - 1e-6]) == [[0], [1]]


def test_vectorize_identity():
    np.testing.assert_array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])


def test_vectorize_stacks_columns():
    np.testing.assert_array_equal(vectorize(np.array([[1, 2], [3, 4]])), [1, 3, 2, 4])


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_devectorize_inverts(rng, d):
    m = ginibre(d, d, rng)
    np.testing.assert_array_equal(devectorize(vectorize(m)), m)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_devectorize_rejects_non_square_length(n):
    with pytest.raises(DimensionError):
        devectorize(np.zeros(n))


@pytest.mark.parametrize("d", [2, 3])
def test_sandwich_rep_by_brute_force(rng, d):
    a, rho, b = ginibre(d, d, rng), ginibre(d, d, rng), ginibre(d, d, rng)
    np.testing.assert_allclose(sandwich_rep(a, b) @ vectorize(rho), vectorize(a @ rho @ b),
                               atol=1e-12)
    # entry by entry: vec(A X B)[i + d*j] = sum_{k,l} A[i,k] X[k,l] B[l,j]
    v = vectorize(rho)
    out = np.zeros(d * d, dtype=complex)
    for i, j, k, l in itertools.product(range(d), repeat=4):
        out[i + d * j] += a[i, k] * v[k + d * l] * b[l, j]
    np.testing.assert_allclose(sandwich_rep(a, b) @ v, out, atol=1e-12)


def test_transpose_permutation(rng):
    m = ginibre(3, 3, rng)
    np.testing.assert_array_equal(transpose_permutation(3) @ vectorize(m), vectorize(m.T))


@pytest.mark.parametrize("m,expected", [
    (np.eye(3), True),
    (np.diag([1.0, 0.0]), True),
    (np.diag([1.0, -1e-12]), True),
    (np.diag([1.0, -1e-6]), False),
    (np.array([[1, 2], [2, 1]]), False),
])
def test_positive_semidefinite_predicate(m, expected):
    assert is_positive_semidefinite(m) is expected
    assert is_positive_semidefinite(m) is is_positive_semidefinite(m)


def test_predicates(rng):
    u = random_unitary(4, rng)
    assert is_unitary(u) and not is_unitary(2 * u)
    assert is_hermitian(PAULI_Z) and not is_hermitian(np.array([[0, 1], [0, 0]]))
    assert is_projection(np.diag([1, 0])) and not is_projection(np.diag([1, 0.5]))


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4), st.lists(finite, min_size=4, max_size=4))
def test_partial_trace_is_linear(x, y):
    a = np.array(x).reshape(2, 2)
    b = np.array(y).reshape(2, 2)
    big = np.kron(a, b) + 1j * np.kron(b, a)
    lhs = partial_trace(2 * big, [2, 2], 1)
    assert np.abs(lhs - 2 * partial_trace(big, [2, 2], 1)).max() <= 1e-9
