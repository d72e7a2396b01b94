"""States, sharp discrete observables and Born-rule statistics.

Borel sets of outcomes are represented by finite sets of outcome indices
(an iterable of ints).  ``None`` stands for the whole outcome set.
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ObservableError, OutcomeError, StateError
from .linalg import (
    CLUSTER_TOL,
    TOL,
    as_matrix,
    cluster_eigenvalues,
    commutator,
    frozen,
    hermitian_eigensystem,
    is_hermitian,
    is_projection,
    min_eigenvalue,
    opnorm,
    partial_trace,
    projector,
    tensor_product,
)

OutcomeSet = Iterable[int]


@dataclass(frozen=True)
class DensityOperator:
    """A positive, unit-trace matrix."""

    matrix: np.ndarray
    tol: float = field(default=TOL, repr=False, compare=False)

    def __post_init__(self):
        m = as_matrix(self.matrix, square=True)
        if not is_hermitian(m, self.tol):
            raise StateError("density operator is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > self.tol:
            raise StateError(f"density operator has trace {tr.real:.12g}, expected 1")
        lam = min_eigenvalue(m)
        if lam < -self.tol:
            raise StateError(f"density operator has negative eigenvalue {lam:.3e}")
        object.__setattr__(self, "matrix", frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_vector(cls, amplitudes) -> DensityOperator:
        return StateVector(amplitudes).density()

    @classmethod
    def maximally_mixed(cls, dim: int) -> DensityOperator:
        return cls(np.eye(dim) / dim)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def reduced(self, dims: Sequence[int], keep) -> DensityOperator:
        return DensityOperator(partial_trace(self.matrix, dims, keep))


@dataclass(frozen=True)
class StateVector:
    """A unit vector in a finite-dimensional Hilbert space."""

    amplitudes: np.ndarray
    tol: float = field(default=TOL, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if abs(np.linalg.norm(v) - 1) > self.tol:
            raise StateError(f"state vector has norm {np.linalg.norm(v):.12g}")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


def as_density(rho) -> DensityOperator:
    if isinstance(rho, DensityOperator):
        return rho
    if isinstance(rho, StateVector):
        return rho.density()
    return DensityOperator(rho)


@dataclass(frozen=True)
class DiscreteObservable:
    """Sharp observable given by outcome values and orthogonal projections.

    The projections must be mutually orthogonal and sum to the identity;
    degenerate outcomes simply carry projections of rank above one.
    """

    values: tuple[float, ...]
    projections: tuple[np.ndarray, ...]
    tol: float = field(default=TOL, repr=False, compare=False)

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        projs = tuple(frozen(as_matrix(p, square=True)) for p in self.projections)
        if not values or len(values) != len(projs):
            raise ObservableError("need one projection per outcome value")
        d = projs[0].shape[0]
        if any(p.shape != (d, d) for p in projs):
            raise DimensionError("projections have different dimensions")
        for v, p in zip(values, projs):
            if not is_projection(p, self.tol):
                raise ObservableError(f"operator for outcome {v} is not a projection")
        for i in range(len(projs)):
            for j in range(i + 1, len(projs)):
                if opnorm(projs[i] @ projs[j]) > self.tol:
                    raise ObservableError(
                        f"projections for outcomes {values[i]} and {values[j]} overlap")
                if abs(values[i] - values[j]) <= CLUSTER_TOL:
                    raise ObservableError(f"duplicate outcome value {values[i]}")
        if opnorm(sum(projs) - np.eye(d)) > self.tol:
            raise ObservableError("projections do not resolve the identity")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "projections", projs)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[0]

    @property
    def outcomes(self) -> list[tuple[float, np.ndarray]]:
        return list(zip(self.values, self.projections))

    def __len__(self) -> int:
        return len(self.values)

    def matrix(self) -> np.ndarray:
        """The Hermitian operator ``sum_i a_i P_i``."""
        return sum(v * p for v, p in zip(self.values, self.projections))

    def ranks(self) -> list[int]:
        return [int(round(np.real(np.trace(p)))) for p in self.projections]

    def is_nondegenerate(self) -> bool:
        return all(r == 1 for r in self.ranks())

    def index_of(self, value: float) -> int | None:
        for i, v in enumerate(self.values):
            if abs(v - value) <= CLUSTER_TOL:
                return i
        return None

    def __repr__(self) -> str:
        return f"DiscreteObservable(dim={self.dim}, values={list(self.values)})"


def observable_from_hermitian(m, tol: float = TOL) -> DiscreteObservable:
    """Spectral decomposition of a Hermitian matrix into a sharp observable.

    Eigenvalues within ``CLUSTER_TOL`` of each other form one outcome whose
    value is the cluster mean and whose projection spans the cluster.
    Outcomes are ordered by decreasing value.
    """
    vals, vecs = hermitian_eigensystem(m, tol)
    values, projs = [], []
    for cluster in cluster_eigenvalues(vals):
        v = vecs[:, cluster]
        values.append(float(np.mean(vals[cluster])))
        projs.append(v @ v.conj().T)
    return DiscreteObservable(tuple(values), tuple(projs), tol=tol)


def observable_from_basis(basis, values: Sequence[float] | None = None,
                          tol: float = TOL) -> DiscreteObservable:
    """Nondegenerate observable diagonal in the columns of ``basis``.

    Values default to ``0, 1, ..., d-1``.
    """
    b = as_matrix(basis, square=True)
    d = b.shape[0]
    values = list(range(d)) if values is None else list(values)
    if len(values) != d:
        raise DimensionError(f"{len(values)} values for a basis of size {d}")
    return DiscreteObservable(tuple(values), tuple(projector(b[:, i]) for i in range(d)), tol=tol)


def lift(obs: DiscreteObservable, dims: Sequence[int], index: int) -> DiscreteObservable:
    """Embed an observable of one subsystem into a composite system.

    ``I (x) ... (x) obs (x) ... (x) I`` with ``obs`` at position ``index``.
    """
    dims = list(dims)
    if dims[index] != obs.dim:
        raise DimensionError(f"observable has dim {obs.dim}, subsystem {index} has {dims[index]}")
    projs = []
    for p in obs.projections:
        factors = [np.eye(d) for d in dims]
        factors[index] = p
        projs.append(tensor_product(*factors))
    return DiscreteObservable(obs.values, tuple(projs), tol=obs.tol)


def _indices(obs: DiscreteObservable, delta: OutcomeSet | None) -> list[int]:
    if delta is None:
        return list(range(len(obs)))
    idx = sorted(set(int(i) for i in delta))
    for i in idx:
        if i < 0 or i >= len(obs):
            raise OutcomeError(f"outcome index {i} out of range for {len(obs)} outcomes")
    return idx


def spectral_projection(obs: DiscreteObservable, delta: OutcomeSet | None) -> np.ndarray:
    """``E^A(delta)``: sum of the projections of the selected outcomes."""
    out = np.zeros((obs.dim, obs.dim), dtype=np.complex128)
    for i in _indices(obs, delta):
        out = out + obs.projections[i]
    return out


def clamp_probability(p: float) -> float:
    return min(1.0, max(0.0, float(p)))


def born_probability(obs: DiscreteObservable, delta: OutcomeSet | None, rho) -> float:
    """``Tr[E^A(delta) rho]``, clamped to ``[0, 1]``."""
    rho = as_density(rho)
    if rho.dim != obs.dim:
        raise DimensionError(f"state dim {rho.dim} != observable dim {obs.dim}")
    p = np.real(np.trace(spectral_projection(obs, delta) @ rho.matrix))
    return clamp_probability(p)


def born_distribution(obs: DiscreteObservable, rho) -> np.ndarray:
    return np.array([born_probability(obs, [i], rho) for i in range(len(obs))])


def commutator_residual(a: DiscreteObservable, b: DiscreteObservable) -> float:
    if a.dim != b.dim:
        raise DimensionError(f"observables act on dims {a.dim} and {b.dim}")
    return max(opnorm(commutator(p, q)) for p in a.projections for q in b.projections)


def commutes(a: DiscreteObservable, b: DiscreteObservable, tol: float = TOL) -> bool:
    """True iff every spectral projection of ``a`` commutes with every one of ``b``."""
    return commutator_residual(a, b) <= tol


def is_pure(rho, tol: float = TOL) -> bool:
    rho = as_density(rho)
    return abs(rho.purity() - 1) <= tol


def dominant_vector(rho) -> np.ndarray:
    """Eigenvector of the largest eigenvalue (the state vector of a pure state)."""
    _, vecs = hermitian_eigensystem(as_density(rho).matrix)
    return vecs[:, 0]
