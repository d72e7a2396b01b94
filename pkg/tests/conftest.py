import numpy as np
import pytest

from opmeasure.observables import observable_from_hermitian

SQ2 = np.sqrt(2.0)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PLUS = np.array([1, 1]) / SQ2
MINUS = np.array([1, -1]) / SQ2
BELL = np.array([1, 0, 0, 1]) / SQ2


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def Z():
    return observable_from_hermitian(PAULI_Z)


@pytest.fixture
def X():
    return observable_from_hermitian(PAULI_X)


@pytest.fixture
def Y():
    return observable_from_hermitian(PAULI_Y)


def rotated_z(theta):
    """Spin observable along an axis tilted by ``theta`` from z in the xz plane."""
    return observable_from_hermitian(np.cos(theta) * PAULI_Z + np.sin(theta) * PAULI_X)
