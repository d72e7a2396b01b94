"""Superoperators and operation-valued measures (instruments).

An :class:`Instrument` stores one completely positive :class:`Superoperator`
per outcome.  The operation for a set of outcomes is the sum of the
corresponding branches, so finite additivity holds by construction.
"""
from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import InitVar, dataclass, field
from itertools import product

import numpy as np

from .errors import (
    DimensionError,
    InstrumentError,
    NotCompatibleError,
    OutcomeError,
    RefinementError,
)
from .linalg import (
    TOL,
    as_matrix,
    dagger,
    devectorize,
    frozen,
    hermitian_eigensystem,
    is_unitary,
    min_eigenvalue,
    operator_basis,
    opnorm,
    sandwich_rep,
    transpose_permutation,
    vectorize,
)
from .observables import (
    DensityOperator,
    DiscreteObservable,
    OutcomeSet,
    as_density,
    clamp_probability,
)
from . import sampling


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Linear map on ``d x d`` matrices stored as a ``d^2 x d^2`` matrix.

    ``rep`` acts on column-stacked vectorizations (see :mod:`opmeasure.linalg`).
    """

    rep: np.ndarray

    def __post_init__(self):
        r = as_matrix(self.rep, square=True)
        d = int(round(np.sqrt(r.shape[0])))
        if d * d != r.shape[0]:
            raise DimensionError(f"superoperator matrix of size {r.shape[0]} is not d^2 x d^2")
        object.__setattr__(self, "rep", frozen(r))

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.rep.shape[0])))

    def __call__(self, x) -> np.ndarray:
        x = as_matrix(x, square=True)
        if x.shape[0] != self.dim:
            raise DimensionError(f"operand dim {x.shape[0]} != superoperator dim {self.dim}")
        return devectorize(self.rep @ vectorize(x))

    def __add__(self, other: Superoperator) -> Superoperator:
        return Superoperator(self.rep + other.rep)

    def __sub__(self, other: Superoperator) -> Superoperator:
        return Superoperator(self.rep - other.rep)

    def __rmul__(self, c) -> Superoperator:
        return Superoperator(c * self.rep)

    def __matmul__(self, other: Superoperator) -> Superoperator:
        """Composition: ``(self @ other)(x) == self(other(x))``."""
        return Superoperator(self.rep @ other.rep)

    @classmethod
    def identity(cls, d: int) -> Superoperator:
        return cls(np.eye(d * d))

    @classmethod
    def zero(cls, d: int) -> Superoperator:
        return cls(np.zeros((d * d, d * d)))

    @classmethod
    def from_kraus(cls, ops: Sequence) -> Superoperator:
        """``rho -> sum_k K_k rho K_k^dag``."""
        ops = [as_matrix(k, square=True) for k in ops]
        if not ops:
            raise DimensionError("need at least one Kraus operator")
        return cls(sum(sandwich_rep(k, dagger(k)) for k in ops))

    @classmethod
    def from_map(cls, fn: Callable[[np.ndarray], np.ndarray], d: int) -> Superoperator:
        """Tabulate a linear map by evaluating it on the matrix units."""
        cols = [vectorize(fn(e)) for e in operator_basis(d)]
        return cls(np.column_stack(cols))

    def dual(self) -> Superoperator:
        """Map ``L*`` with ``Tr[(L* X) rho] == Tr[X (L rho)]`` for all X, rho.

        In the column-stacking convention this is ``P rep^T P`` with ``P``
        the transpose permutation; for Hermiticity-preserving maps it equals
        ``rep^dag``.
        """
        p = transpose_permutation(self.dim)
        return Superoperator(p @ self.rep.T @ p)

    def choi(self) -> np.ndarray:
        """``sum_ij |i><j| (x) L(|i><j|)``."""
        d = self.dim
        # rep[a + b*d, i + j*d] = L(|i><j|)[a, b]
        r = self.rep.reshape(d, d, d, d)  # indices (b, a, j, i)
        return r.transpose(3, 1, 2, 0).reshape(d * d, d * d)

    def kraus(self, tol: float = TOL) -> list[np.ndarray]:
        """Kraus operators from the Choi spectrum (eigenvalues above ``tol``)."""
        d = self.dim
        vals, vecs = hermitian_eigensystem(self.choi(), tol=max(tol, 1e-7))
        return [np.sqrt(lam) * vecs[:, k].reshape(d, d).T
                for k, lam in enumerate(vals) if lam > tol]

    def cp_residual(self) -> float:
        """How far the Choi matrix is from positive (0 when CP)."""
        return max(0.0, -min_eigenvalue(self.choi()))

    def is_completely_positive(self, tol: float = TOL) -> bool:
        return self.cp_residual() <= tol

    def tp_residual(self) -> float:
        return opnorm(self.dual()(np.eye(self.dim)) - np.eye(self.dim))

    def is_trace_preserving(self, tol: float = TOL) -> bool:
        return self.tp_residual() <= tol

    def is_unital(self, tol: float = TOL) -> bool:
        return opnorm(self(np.eye(self.dim)) - np.eye(self.dim)) <= tol

    def distance(self, other: Superoperator) -> float:
        return opnorm(self.rep - other.rep)


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-indexed family of completely positive branches.

    Pass ``check=False`` to build a family that violates the instrument
    axioms (for instance to exercise :func:`audit_davies_lewis`).
    """

    values: tuple[float, ...]
    branches: tuple[Superoperator, ...]
    observable: DiscreteObservable | None = None
    check: InitVar[bool] = True
    tol: float = field(default=TOL, repr=False)

    def __post_init__(self, check: bool):
        values = tuple(float(v) for v in self.values)
        branches = tuple(self.branches)
        if not branches or len(values) != len(branches):
            raise InstrumentError("need one branch per outcome value")
        d = branches[0].dim
        if any(b.dim != d for b in branches):
            raise DimensionError("branches act on different dimensions")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "branches", branches)
        if check:
            self.validate()

    @property
    def dim(self) -> int:
        return self.branches[0].dim

    def __len__(self) -> int:
        return len(self.branches)

    def validate(self) -> None:
        for v, b in zip(self.values, self.branches):
            r = b.cp_residual()
            if r > self.tol:
                raise InstrumentError(f"branch {v} is not completely positive (Choi min eig {-r:.3e})")
        r = self.total().tp_residual()
        if r > self.tol:
            raise InstrumentError(f"total operation is not trace preserving (residual {r:.3e})")
        if self.observable is not None and compatibility_residual(self, self.observable) > self.tol:
            raise InstrumentError("instrument does not measure its declared observable")

    def _indices(self, delta: OutcomeSet | None) -> list[int]:
        if delta is None:
            return list(range(len(self)))
        idx = sorted(set(int(i) for i in delta))
        for i in idx:
            if i < 0 or i >= len(self):
                raise OutcomeError(f"outcome index {i} out of range for {len(self)} outcomes")
        return idx

    def operation(self, delta: OutcomeSet | None = None) -> Superoperator:
        """``X(delta)``; the whole outcome set when ``delta`` is None."""
        out = Superoperator.zero(self.dim)
        for i in self._indices(delta):
            out = out + self.branches[i]
        return out

    def total(self) -> Superoperator:
        return self.operation(None)

    def effects(self) -> list[np.ndarray]:
        """``X{a_n}* I`` for every outcome: the measured POVM."""
        eye = np.eye(self.dim)
        return [b.dual()(eye) for b in self.branches]

    def with_observable(self, obs: DiscreteObservable) -> Instrument:
        return Instrument(self.values, self.branches, obs, tol=self.tol)

    def measured_observable(self) -> DiscreteObservable:
        """The sharp observable this instrument measures.

        Outcomes with vanishing effect are dropped.  Raises
        :class:`NotCompatibleError` if the effects are not projections.
        """
        if self.observable is not None:
            return self.observable
        vals, projs = [], []
        for v, e in zip(self.values, self.effects()):
            if opnorm(e) <= self.tol:
                continue
            vals.append(v)
            projs.append(e)
        try:
            return DiscreteObservable(tuple(vals), tuple(projs), tol=self.tol)
        except (ValueError, DimensionError) as exc:
            raise NotCompatibleError(f"instrument effects are not a sharp observable: {exc}") from exc

    def kraus(self) -> list[list[np.ndarray]]:
        return [b.kraus(self.tol) for b in self.branches]

    @classmethod
    def from_kraus(cls, values: Sequence[float], kraus: Sequence[Sequence],
                   observable: DiscreteObservable | None = None,
                   check: bool = True, tol: float = TOL) -> Instrument:
        branches = [Superoperator.from_kraus(ops) for ops in kraus]
        return cls(tuple(values), tuple(branches), observable, check=check, tol=tol)


def luders_instrument(obs: DiscreteObservable) -> Instrument:
    """Projection-postulate instrument: branch ``n`` is ``rho -> P_n rho P_n``."""
    return Instrument.from_kraus(obs.values, [[p] for p in obs.projections], obs, tol=obs.tol)


def von_neumann_instrument(obs: DiscreteObservable, refinement) -> Instrument:
    """Repeatable measurement of ``obs`` through a nondegenerate refinement.

    ``refinement`` is a unitary whose columns form an orthonormal basis in
    which every vector lies inside one eigenspace of ``obs``.  Branch ``n``
    maps ``rho`` to ``sum_m <phi_nm|rho|phi_nm> |phi_nm><phi_nm|``.
    """
    tol = obs.tol
    b = as_matrix(refinement, square=True)
    if b.shape[0] != obs.dim:
        raise RefinementError(f"refinement has dim {b.shape[0]}, observable has {obs.dim}")
    if not is_unitary(b, tol):
        raise RefinementError("refinement basis is not orthonormal and complete")
    groups: list[list[np.ndarray]] = [[] for _ in range(len(obs))]
    for k in range(b.shape[1]):
        phi = b[:, k]
        hits = [n for n, p in enumerate(obs.projections) if np.linalg.norm(p @ phi - phi) <= tol]
        if len(hits) != 1:
            raise RefinementError(f"basis vector {k} is not inside an eigenspace of the observable")
        groups[hits[0]].append(np.outer(phi, phi.conj()))
    for n, (g, r) in enumerate(zip(groups, obs.ranks())):
        if len(g) != r:
            raise RefinementError(f"outcome {obs.values[n]} gets {len(g)} basis vectors, rank is {r}")
    return Instrument.from_kraus(obs.values, groups, obs, tol=tol)


def identity_instrument(d: int) -> Instrument:
    """Single outcome, no state change: measures the identity observable."""
    obs = DiscreteObservable((1.0,), (np.eye(d),))
    return Instrument((1.0,), (Superoperator.identity(d),), obs)


def nonselective_operation(instr: Instrument) -> Superoperator:
    """``T = X(R)``, the state change ignoring the outcome."""
    return instr.total()


def dual(s: Superoperator) -> Superoperator:
    return s.dual()


def _alignment(instr: Instrument, obs: DiscreteObservable) -> tuple[list[list[int]], list[int]]:
    """Group instrument outcomes by the observable outcome with the same value."""
    if instr.dim != obs.dim:
        raise DimensionError(f"instrument dim {instr.dim} != observable dim {obs.dim}")
    groups: list[list[int]] = [[] for _ in range(len(obs))]
    unmatched = []
    for n, v in enumerate(instr.values):
        i = obs.index_of(v)
        if i is None:
            unmatched.append(n)
        else:
            groups[i].append(n)
    return groups, unmatched


def compatibility_residual(instr: Instrument, obs: DiscreteObservable) -> float:
    """``max ||X(delta)* I - E^A(delta)||`` over singleton outcome values."""
    groups, unmatched = _alignment(instr, obs)
    effects = instr.effects()
    res = 0.0
    for i, g in enumerate(groups):
        e = sum((effects[n] for n in g), np.zeros((obs.dim, obs.dim)))
        res = max(res, opnorm(e - obs.projections[i]))
    for n in unmatched:
        res = max(res, opnorm(effects[n]))
    return res


def measures(instr: Instrument, obs: DiscreteObservable, tol: float = TOL) -> bool:
    """True iff ``X(delta)* I == E^A(delta)`` for every outcome value."""
    return compatibility_residual(instr, obs) <= tol


def aligned_operations(instr: Instrument, obs: DiscreteObservable,
                       tol: float = TOL) -> list[Superoperator]:
    """``X{a_i}`` for each outcome ``a_i`` of ``obs``, in the observable's order.

    Raises :class:`NotCompatibleError` unless ``instr`` measures ``obs``.
    Instrument outcomes absent from ``obs`` have zero effect and hence are
    the zero map; they are dropped.
    """
    r = compatibility_residual(instr, obs)
    if r > tol:
        raise NotCompatibleError(
            f"instrument does not measure the observable (residual {r:.3e})")
    groups, _ = _alignment(instr, obs)
    out = []
    for g in groups:
        op = Superoperator.zero(instr.dim)
        for n in g:
            op = op + instr.branches[n]
        out.append(op)
    return out


def apply(instr: Instrument, delta: OutcomeSet | None, rho) -> tuple[float, DensityOperator | None]:
    """Outcome probability and conditional output state.

    The posterior is ``None`` when the probability does not exceed the
    instrument tolerance: the conditional state is undefined there.
    """
    rho = as_density(rho)
    if rho.dim != instr.dim:
        raise DimensionError(f"state dim {rho.dim} != instrument dim {instr.dim}")
    out = instr.operation(delta)(rho.matrix)
    p = float(np.real(np.trace(out)))
    if p <= instr.tol:
        return clamp_probability(p), None
    post = out / p
    post = (post + dagger(post)) / 2
    return clamp_probability(p), DensityOperator(post, tol=max(instr.tol, 1e-8))


def _probe_states(d: int, samples: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return operator_basis(d) + [sampling.random_density(d, rng) for _ in range(samples)]


@dataclass
class FactoringReport:
    residuals: dict[str, float]
    tol: float = TOL

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def to_dict(self) -> dict:
        return {"passed": self.passed, "max_residual": self.max_residual,
                "residuals": dict(self.residuals)}


def check_factoring(instr: Instrument, obs: DiscreteObservable, samples: int = 8,
                    seed: int = 0, tol: float = TOL) -> FactoringReport:
    """Verify that every branch factors through the nonselective operation.

    For each outcome with projection ``E``, compares ``X{a}`` with
    ``T(E .)``, ``T(. E)`` and ``T(E . E)`` on matrix units plus random
    states, and the dual ``X{a}*`` with ``(T* .)E``, ``E(T* .)`` and
    ``E(T* .)E`` on matrix units.
    """
    ops = aligned_operations(instr, obs, tol)
    t = instr.total()
    t_dual = t.dual()
    res = {k: 0.0 for k in ("T(E rho)", "T(rho E)", "T(E rho E)",
                            "(T* B) E", "E (T* B)", "E (T* B) E")}
    states = _probe_states(instr.dim, samples, seed)
    for x, e in zip(ops, obs.projections):
        x_dual = x.dual()
        for rho in states:
            lhs = x(rho)
            res["T(E rho)"] = max(res["T(E rho)"], opnorm(lhs - t(e @ rho)))
            res["T(rho E)"] = max(res["T(rho E)"], opnorm(lhs - t(rho @ e)))
            res["T(E rho E)"] = max(res["T(E rho E)"], opnorm(lhs - t(e @ rho @ e)))
        for b in operator_basis(instr.dim):
            lhs = x_dual(b)
            tb = t_dual(b)
            res["(T* B) E"] = max(res["(T* B) E"], opnorm(lhs - tb @ e))
            res["E (T* B)"] = max(res["E (T* B)"], opnorm(lhs - e @ tb))
            res["E (T* B) E"] = max(res["E (T* B) E"], opnorm(lhs - e @ tb @ e))
    return FactoringReport(res, tol)


@dataclass
class AuditReport:
    """Per-axiom maximal residuals; an axiom passes when its residual is at most ``tol``."""

    residuals: dict[str, float]
    tol: float = TOL

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.residuals.items() if v > self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"passed": self.passed, "failures": self.failures,
                "residuals": dict(self.residuals)}


def _disjoint_pairs(n: int, rng: np.random.Generator, limit: int = 81):
    """Pairs of disjoint outcome subsets: all of them when few, else a sample."""
    if 3 ** n <= limit:
        for labels in product(range(3), repeat=n):
            yield ([i for i in range(n) if labels[i] == 1],
                   [i for i in range(n) if labels[i] == 2])
    else:
        for _ in range(limit):
            labels = rng.integers(0, 3, size=n)
            yield (list(np.flatnonzero(labels == 1)), list(np.flatnonzero(labels == 2)))


def audit_davies_lewis(instr: Instrument, samples: int = 32, seed: int = 0) -> AuditReport:
    """Check the instrument axioms numerically.

    * ``DL1_additivity``: ``X(D1 u D2) = X(D1) + X(D2)`` on disjoint subsets;
    * ``DL2_trace_preservation``: ``Tr[X(R) rho] = Tr[rho]``, via ``X(R)* I = I``;
    * ``DL3_probability``: ``Tr[X(D) rho]`` lies in ``[0, 1]`` for states;
    * ``DL4_posterior``: normalized outputs are density operators;
    * ``positivity`` and ``complete_positivity`` (Choi spectrum) of branches;
    * ``affinity``: ``X(D)`` respects mixtures of states;
    * ``born_compatibility`` when the instrument declares an observable.
    """
    rng = np.random.default_rng(seed)
    d = instr.dim
    n = len(instr)
    states = [sampling.random_density(d, rng) for _ in range(max(samples, 2))]
    res: dict[str, float] = {}

    r = 0.0
    for a, b in _disjoint_pairs(n, rng):
        union = instr.operation(a + b)
        split = instr.operation(a) + instr.operation(b)
        for rho in states[:4]:
            r = max(r, opnorm(union(rho) - split(rho)))
    res["DL1_additivity"] = r

    total = instr.total()
    r = total.tp_residual()
    for e in operator_basis(d):
        r = max(r, abs(np.trace(total(e)) - np.trace(e)))
    res["DL2_trace_preservation"] = float(r)

    r_prob, r_post, r_pos = 0.0, 0.0, 0.0
    for rho in states:
        for i, branch in enumerate(instr.branches):
            out = branch(rho)
            r_pos = max(r_pos, -min_eigenvalue(out), opnorm(out - dagger(out)))
            p = float(np.real(np.trace(out)))
            r_prob = max(r_prob, -p, p - 1)
            if p > 1e-6:
                post = out / p
                r_post = max(r_post, abs(np.trace(post) - 1), opnorm(post - dagger(post)))
        p_all = float(np.real(np.trace(total(rho))))
        r_prob = max(r_prob, abs(p_all - 1))
    res["DL3_probability"] = max(0.0, r_prob)
    res["DL4_posterior"] = max(0.0, float(r_post))
    res["positivity"] = max(0.0, r_pos)
    res["complete_positivity"] = max(b.cp_residual() for b in instr.branches)

    r = 0.0
    for k in range(min(samples, 16)):
        alpha = rng.uniform(0.05, 0.95)
        r1, r2 = states[k % len(states)], states[(k + 1) % len(states)]
        mix = alpha * r1 + (1 - alpha) * r2
        for i in range(n):
            x = instr.branches[i]
            r = max(r, opnorm(x(mix) - alpha * x(r1) - (1 - alpha) * x(r2)))
    res["affinity"] = r

    if instr.observable is not None:
        res["born_compatibility"] = compatibility_residual(instr, instr.observable)
    return AuditReport(res, instr.tol)
