import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmeasure.errors import DimensionError, ObservableError, OutcomeError, StateError
from opmeasure.observables import (
    DensityOperator,
    DiscreteObservable,
    StateVector,
    born_distribution,
    born_probability,
    commutes,
    dominant_vector,
    is_pure,
    lift,
    observable_from_basis,
    observable_from_hermitian,
    spectral_projection,
)
from opmeasure.sampling import random_commuting_observable, random_density, random_observable

from conftest import MINUS, PAULI_X, PAULI_Y, PAULI_Z, PLUS


@pytest.mark.parametrize("m,msg", [
    (np.diag([0.5, 0.6]), "trace"),
    (np.array([[0.5, 0.1], [0.0, 0.5]]), "Hermitian"),
    (np.diag([1.5, -0.5]), "negative"),
])
def test_density_rejects(m, msg):
    with pytest.raises(StateError, match=msg):
        DensityOperator(m)


def test_density_accepts_tiny_negative_eigenvalue():
    DensityOperator(np.diag([1 + 1e-12, -1e-12]))


def test_state_vector_norm():
    with pytest.raises(StateError):
        StateVector([1, 1])
    v = StateVector(PLUS)
    assert v.dim == 2
    np.testing.assert_allclose(v.density().matrix, np.full((2, 2), 0.5))


def test_density_is_immutable():
    rho = DensityOperator(np.eye(2) / 2)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 1


def test_observable_from_pauli_z(Z):
    assert Z.values == (1.0, -1.0)
    np.testing.assert_allclose(Z.projections[0], np.diag([1, 0]))
    np.testing.assert_allclose(Z.matrix(), PAULI_Z)


def test_degenerate_spectrum_is_clustered():
    obs = observable_from_hermitian(np.diag([1.0, 2.0, 1.0 + 1e-9]))
    assert len(obs) == 2
    assert obs.ranks() == [1, 2]
    assert not obs.is_nondegenerate()


@pytest.mark.parametrize("values,projs,msg", [
    ((1, 2), (np.diag([1, 0]), np.diag([1, 0])), "overlap"),
    ((1, 2), (np.diag([1, 0]), np.diag([0, 0.5])), "not a projection"),
    ((1, 2), (np.diag([1, 0, 0]), np.diag([0, 1, 0])), "identity"),
    ((1, 1 + 1e-9), (np.diag([1, 0]), np.diag([0, 1])), "duplicate"),
    ((1,), (np.diag([1, 0]), np.diag([0, 1])), "one projection"),
])
def test_observable_invariants(values, projs, msg):
    with pytest.raises(ObservableError, match=msg):
        DiscreteObservable(values, projs)


def test_observable_dimension_mismatch():
    with pytest.raises(DimensionError):
        DiscreteObservable((1, 2), (np.eye(2), np.eye(3)))


def test_born_probability_plus_state(Z):
    assert born_probability(Z, [0], StateVector(PLUS)) == pytest.approx(0.5)
    assert born_probability(Z, None, np.eye(2) / 2) == pytest.approx(1.0)
    assert born_probability(Z, [], np.eye(2) / 2) == 0.0


def test_born_rejects_bad_outcomes_and_dims(Z):
    with pytest.raises(OutcomeError):
        born_probability(Z, [2], np.eye(2) / 2)
    with pytest.raises(DimensionError):
        born_probability(Z, [0], np.eye(3) / 3)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_born_distribution_sums_to_one(rng, d):
    obs = random_observable(d, rng)
    p = born_distribution(obs, random_density(d, rng))
    assert p.min() >= 0 and abs(p.sum() - 1) <= 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_born_additive_over_outcomes(rng, d):
    obs = random_observable(d, rng, outcomes=d)
    rho = random_density(d, rng)
    total = born_probability(obs, [0, 1], rho)
    parts = born_probability(obs, [0], rho) + born_probability(obs, [1], rho)
    assert total == pytest.approx(parts, abs=1e-12)


def test_spectral_projection_of_everything_is_identity(rng):
    obs = random_observable(4, rng)
    np.testing.assert_allclose(spectral_projection(obs, None), np.eye(4), atol=1e-12)


def test_commutation(Z, X, Y):
    assert commutes(Z, Z)
    assert not commutes(Z, X)
    assert not commutes(X, Y)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_random_commuting_observable_commutes(rng, d):
    a = random_observable(d, rng)
    assert commutes(a, random_commuting_observable(a, rng))


def test_observable_from_basis():
    obs = observable_from_basis(np.column_stack([PLUS, MINUS]), [1, -1])
    np.testing.assert_allclose(obs.matrix(), PAULI_X, atol=1e-15)
    with pytest.raises(DimensionError):
        observable_from_basis(np.eye(2), [1, 2, 3])


def test_lift(Z):
    big = lift(Z, [2, 3], 0)
    np.testing.assert_allclose(big.matrix(), np.kron(PAULI_Z, np.eye(3)))
    np.testing.assert_allclose(lift(Z, [3, 2], 1).matrix(), np.kron(np.eye(3), PAULI_Z))
    with pytest.raises(DimensionError):
        lift(Z, [3, 2], 0)


def test_index_of(Z):
    assert Z.index_of(-1.0) == 1
    assert Z.index_of(-1.0 + 1e-9) == 1
    assert Z.index_of(0.0) is None


def test_purity_and_dominant_vector():
    rho = DensityOperator(np.outer(MINUS, MINUS))
    assert is_pure(rho)
    v = dominant_vector(rho)
    assert abs(abs(np.vdot(v, MINUS)) - 1) < 1e-12
    assert not is_pure(np.eye(2) / 2)


def test_y_eigenvectors(Y):
    np.testing.assert_allclose(Y.matrix(), PAULI_Y, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_random_observable_invariants(d, seed):
    rng = np.random.default_rng(seed)
    obs = random_observable(d, rng)
    assert np.abs(sum(obs.projections) - np.eye(d)).max() <= 1e-9
    assert sum(obs.ranks()) == d
    # round trip through the Hermitian matrix keeps the spectral data
    back = observable_from_hermitian(obs.matrix())
    for v, p in obs.outcomes:
        i = back.index_of(v)
        assert i is not None and np.abs(back.projections[i] - p).max() <= 1e-9
