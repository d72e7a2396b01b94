"""Successive measurements: joint statistics, disturbance and simultaneity.

The first measurement is described by an instrument measuring ``A``; the
second by a sharp observable ``B`` measured immediately afterwards.
Wherever two routes to the same decision exist (joint table versus
Heisenberg-picture disturbance, commutator criterion versus disturbance)
both are computed and their agreement is reported.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, MixedProbeError, NotLocalError
from .instruments import Instrument, aligned_operations, luders_instrument
from .linalg import (
    TOL,
    as_matrix,
    commutator,
    dagger,
    matrix_unit,
    opnorm,
)
from .models import IndirectModel, instrument_from_model
from .observables import (
    DiscreteObservable,
    StateVector,
    as_density,
    commutes,
    dominant_vector,
    is_pure,
    lift,
    observable_from_basis,
)
from . import sampling


@dataclass
class JointDistribution:
    """``table[n, m] = Pr{a = outcomes_a[n], b = outcomes_b[m]}``."""

    outcomes_a: tuple[float, ...]
    outcomes_b: tuple[float, ...]
    table: np.ndarray
    formula_residual: float = 0.0
    tol: float = field(default=TOL, repr=False)

    def __post_init__(self):
        t = np.real_if_close(np.asarray(self.table), tol=1e6).astype(float)
        if t.shape != (len(self.outcomes_a), len(self.outcomes_b)):
            raise DimensionError(f"table shape {t.shape} does not match outcome lists")
        if t.size and (t.min() < -self.tol or abs(t.sum() - 1) > self.tol):
            raise ValueError(f"not a probability table (min {t.min():.3e}, sum {t.sum():.12g})")
        self.table = np.clip(t, 0.0, 1.0)

    @property
    def marginal_a(self) -> np.ndarray:
        return self.table.sum(axis=1)

    @property
    def marginal_b(self) -> np.ndarray:
        return self.table.sum(axis=0)

    def distance(self, other: JointDistribution) -> float:
        return float(np.max(np.abs(self.table - other.table)))

    def to_dict(self) -> dict:
        return {"outcomes_a": list(self.outcomes_a), "outcomes_b": list(self.outcomes_b),
                "table": self.table.tolist(), "formula_residual": self.formula_residual}


def _raw_joint(ops, obs_b: DiscreteObservable, rho: np.ndarray) -> np.ndarray:
    """``Tr[E^B{b_m} X{a_n} rho]`` (complex; linear in ``rho``)."""
    out = np.empty((len(ops), len(obs_b)), dtype=np.complex128)
    for n, x in enumerate(ops):
        post = x(rho)
        for m, q in enumerate(obs_b.projections):
            out[n, m] = np.trace(q @ post)
    return out


def _product_joint(obs_a: DiscreteObservable, obs_b: DiscreteObservable,
                   rho: np.ndarray) -> np.ndarray:
    """``Tr[E^A{a_n} E^B{b_m} rho]``: the simultaneous-measurement formula."""
    return np.array([[np.trace(p @ q @ rho) for q in obs_b.projections]
                     for p in obs_a.projections])


def successive_joint(instr: Instrument, obs_b: DiscreteObservable, rho,
                     obs_a: DiscreteObservable | None = None,
                     tol: float = TOL) -> JointDistribution:
    """Joint distribution of the instrument outcome and an immediate ``B`` readout.

    ``table[n, m] = Tr[E^B{b_m} X{a_n} rho]``.  The same table is also
    evaluated in the Heisenberg picture as ``Tr[E^A{a_n} (T* E^B{b_m}) rho]``;
    the largest difference is stored as ``formula_residual``.
    """
    obs_a = instr.measured_observable() if obs_a is None else obs_a
    rho = as_density(rho)
    if obs_b.dim != instr.dim or rho.dim != instr.dim:
        raise DimensionError("instrument, observable and state dimensions differ")
    ops = aligned_operations(instr, obs_a, tol)
    table = _raw_joint(ops, obs_b, rho.matrix)
    t_dual = instr.total().dual()
    heis = np.array([[np.trace(p @ t_dual(q) @ rho.matrix) for q in obs_b.projections]
                     for p in obs_a.projections])
    resid = float(np.max(np.abs(table - heis)))
    return JointDistribution(obs_a.values, obs_b.values, np.real(table), resid, tol)


@dataclass
class DisturbanceReport:
    """Largest ``||T* E^B{b} - E^B{b}||`` over the outcomes ``b`` of ``B``."""

    disturbed: bool
    worst_outcome: float
    residual: float

    def to_dict(self) -> dict:
        return {"disturbed": self.disturbed, "worst_outcome": self.worst_outcome,
                "residual": self.residual}


def disturbance_residuals(instr: Instrument, obs_b: DiscreteObservable,
                          evolution=None) -> list[float]:
    if obs_b.dim != instr.dim:
        raise DimensionError(f"observable dim {obs_b.dim} != instrument dim {instr.dim}")
    t_dual = instr.total().dual()
    v = None if evolution is None else as_matrix(evolution, square=True)
    out = []
    for q in obs_b.projections:
        target = q if v is None else dagger(v) @ q @ v
        out.append(opnorm(t_dual(q) - target))
    return out


def disturbs(instr: Instrument, obs_b: DiscreteObservable, evolution=None,
             tol: float = TOL) -> DisturbanceReport:
    """Does the nonselective state change perturb the statistics of ``B``?

    Without ``evolution`` the measurement is instantaneous and the test is
    ``T* E^B{b} == E^B{b}``.  With a unitary ``evolution`` ``V`` (free
    evolution over the measuring time) the comparison target becomes
    ``V^dag E^B{b} V``.
    """
    res = disturbance_residuals(instr, obs_b, evolution)
    worst = int(np.argmax(res))
    return DisturbanceReport(res[worst] > tol, obs_b.values[worst], res[worst])


def disturbed_outcome_count(instr: Instrument, obs_b: DiscreteObservable, tol: float = TOL) -> int:
    return sum(r > tol for r in disturbance_residuals(instr, obs_b))


@dataclass
class SimultaneityReport:
    simultaneous: bool
    joint_residual: float
    witness: dict | None
    disturbance: DisturbanceReport
    commuting: bool

    @property
    def agrees_with_disturbance(self) -> bool:
        return self.simultaneous == (not self.disturbance.disturbed)

    @property
    def consistent_with_commutation(self) -> bool:
        """A simultaneous measurement forces the observables to commute."""
        return self.commuting or not self.simultaneous

    def __bool__(self) -> bool:
        return self.simultaneous

    def to_dict(self) -> dict:
        return {"simultaneous": self.simultaneous, "joint_residual": self.joint_residual,
                "witness": self.witness, "disturbance": self.disturbance.to_dict(),
                "commuting": self.commuting,
                "agrees_with_disturbance": self.agrees_with_disturbance,
                "consistent_with_commutation": self.consistent_with_commutation}


def _spanning_states(d: int, samples: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    basis = [matrix_unit(d, i, j) for i in range(d) for j in range(d)]
    return basis + [sampling.random_density(d, rng) for _ in range(samples)]


def is_simultaneous(instr: Instrument, obs_b: DiscreteObservable,
                    obs_a: DiscreteObservable | None = None, samples: int = 8,
                    seed: int = 0, tol: float = TOL) -> SimultaneityReport:
    """Is the successive measurement a simultaneous measurement of ``A`` and ``B``?

    Compares the successive joint table with ``Tr[E^A E^B rho]`` over all
    matrix units ``rho`` (which span every input by linearity) plus
    ``samples`` random states, and independently decides disturbance of
    ``B``.  The verdict comes from the joint tables alone.
    """
    obs_a = instr.measured_observable() if obs_a is None else obs_a
    ops = aligned_operations(instr, obs_a, tol)
    worst, witness = 0.0, None
    for k, rho in enumerate(_spanning_states(instr.dim, samples, seed)):
        diff = np.abs(_raw_joint(ops, obs_b, rho) - _product_joint(obs_a, obs_b, rho))
        n, m = np.unravel_index(int(np.argmax(diff)), diff.shape)
        if diff[n, m] > worst:
            worst = float(diff[n, m])
            witness = {"outcome_a": obs_a.values[n], "outcome_b": obs_b.values[m], "state_index": k}
    return SimultaneityReport(worst <= tol, worst, witness if worst > tol else None,
                              disturbs(instr, obs_b, tol=tol), commutes(obs_a, obs_b, tol))


@dataclass
class CommutatorReport:
    holds: bool
    residual: float
    witness: dict | None
    disturbance: DisturbanceReport

    @property
    def agrees_with_disturbance(self) -> bool:
        return self.holds == (not self.disturbance.disturbed)

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "residual": self.residual, "witness": self.witness,
                "disturbance": self.disturbance.to_dict(),
                "agrees_with_disturbance": self.agrees_with_disturbance}


def commutator_criterion(model: IndirectModel, obs_b: DiscreteObservable,
                         tol: float = TOL) -> CommutatorReport:
    """Pure-probe test ``[U, E^B{b} (x) I] |psi (x) Phi> = 0`` for all ``b`` and ``psi``.

    ``psi`` runs over the computational basis, which suffices by linearity.
    Raises :class:`MixedProbeError` when the probe state is not pure.
    """
    if not is_pure(model.sigma, tol):
        raise MixedProbeError(f"probe state has purity {model.sigma.purity():.12g}")
    if obs_b.dim != model.sys_dim:
        raise DimensionError(f"observable dim {obs_b.dim} != system dim {model.sys_dim}")
    phi = dominant_vector(model.sigma)
    d = model.sys_dim
    worst, witness = 0.0, None
    for m, q in enumerate(obs_b.projections):
        c = commutator(model.U, np.kron(q, np.eye(model.probe_dim)))
        for i in range(d):
            psi = np.zeros(d)
            psi[i] = 1.0
            r = float(np.linalg.norm(c @ np.kron(psi, phi)))
            if r > worst:
                worst, witness = r, {"outcome_b": obs_b.values[m], "basis_index": i}
    report = disturbs(instrument_from_model(model), obs_b, tol=tol)
    return CommutatorReport(worst <= tol, worst, witness if worst > tol else None, report)


def local_residual(model: IndirectModel, dims: Sequence[int], which: int = 0) -> float:
    """``max_j ||[U, I (x) E_j (x) I_K]||`` over matrix units ``E_j`` of the other subsystem.

    ``which`` names the subsystem the apparatus is local in; the ordering
    is ``S1 (x) S2 (x) K``.
    """
    d1, d2 = (int(x) for x in dims)
    if d1 * d2 != model.sys_dim:
        raise DimensionError(f"split {dims} does not match system dim {model.sys_dim}")
    if which not in (0, 1):
        raise DimensionError("which must be 0 or 1")
    other = d2 if which == 0 else d1
    worst = 0.0
    for i in range(other):
        for j in range(other):
            e = matrix_unit(other, i, j)
            if which == 0:
                x = np.kron(np.kron(np.eye(d1), e), np.eye(model.probe_dim))
            else:
                x = np.kron(np.kron(e, np.eye(d2)), np.eye(model.probe_dim))
            worst = max(worst, opnorm(commutator(model.U, x)))
    return worst


def is_local(model: IndirectModel, dims: Sequence[int], which: int = 0, tol: float = TOL) -> bool:
    """Does the interaction commute with every operator of the untouched subsystem?"""
    return local_residual(model, dims, which) <= tol


@dataclass
class EPRReport:
    joint: JointDistribution
    expected: np.ndarray
    residual: float
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {"passed": self.passed, "residual": self.residual, "joint": self.joint.to_dict(),
                "expected": np.asarray(self.expected).tolist()}


def product_formula(obs_c: DiscreteObservable, obs_d: DiscreteObservable, rho) -> np.ndarray:
    """``Tr[(E^C{c_n} (x) E^D{d_m}) rho]``."""
    rho = as_density(rho).matrix
    return np.array([[np.real(np.trace(np.kron(p, q) @ rho)) for q in obs_d.projections]
                     for p in obs_c.projections])


def epr_joint(model: IndirectModel, obs_c: DiscreteObservable, obs_d: DiscreteObservable,
              rho, tol: float = TOL) -> EPRReport:
    """Joint statistics of a local ``C`` measurement on ``S1`` followed by ``D`` on ``S2``.

    The model must be local in ``S1`` and measure ``C (x) I``.  The joint
    table is computed through the induced instrument and compared with
    ``Tr[(E^C (x) E^D) rho]``.
    """
    dims = [obs_c.dim, obs_d.dim]
    r = local_residual(model, dims, 0)
    if r > tol:
        raise NotLocalError(f"interaction acts on S2 (residual {r:.3e})")
    a = lift(obs_c, dims, 0)
    b = lift(obs_d, dims, 1)
    joint = successive_joint(instrument_from_model(model), b, rho, obs_a=a, tol=tol)
    expected = product_formula(obs_c, obs_d, rho)
    return EPRReport(joint, expected, float(np.max(np.abs(joint.table - expected))), tol)


@dataclass
class EPRReduction:
    """Reduced states and joint table from expanding ``Psi`` along ``{phi_n}``."""

    coefficients: list[np.ndarray]
    conditional_states: list[StateVector | None]
    probabilities: np.ndarray
    table: np.ndarray
    residuals: dict[str, float]
    tol: float = TOL

    @property
    def passed(self) -> bool:
        return max(self.residuals.values()) <= self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "probabilities": self.probabilities.tolist(),
            "table": self.table.tolist(),
            "conditional_states": [None if s is None
                                   else [[float(z.real), float(z.imag)] for z in s.amplitudes]
                                   for s in self.conditional_states],
            "residuals": dict(self.residuals),
        }


def epr_reduction(psi, basis_c, obs_d: DiscreteObservable,
                  values_c: Sequence[float] | None = None, tol: float = TOL) -> EPRReduction:
    """Expand ``Psi = sum_n phi_n (x) eta_n`` and reduce onto each term.

    ``basis_c`` holds the orthonormal ``phi_n`` as columns; ``obs_d`` must be
    nondegenerate.  The joint table ``|<phi_n (x) xi_m|Psi>|^2`` is checked
    against the projection-postulate successive measurement of
    ``C (x) I`` then ``I (x) D`` (``C`` diagonal in ``basis_c`` with
    ``values_c``), and the identity ``(|phi_n><phi_n| (x) I) Psi = phi_n (x) eta_n``
    is checked directly.
    """
    psi = StateVector(psi).amplitudes
    basis = as_matrix(basis_c, square=True)
    d1 = basis.shape[0]
    if psi.size % d1 or psi.size // d1 != obs_d.dim:
        raise DimensionError(f"state of dim {psi.size} does not split as {d1} x {obs_d.dim}")
    if not obs_d.is_nondegenerate():
        raise DimensionError("second observable must be nondegenerate")
    d2 = obs_d.dim
    xis = [dominant_vector(q) for q in obs_d.projections]
    amp = psi.reshape(d1, d2)
    etas, states, probs = [], [], []
    r_expand = 0.0
    for n in range(d1):
        phi = basis[:, n]
        eta = phi.conj() @ amp
        etas.append(eta)
        term = np.kron(phi, eta)
        proj = np.kron(np.outer(phi, phi.conj()), np.eye(d2))
        r_expand = max(r_expand, float(np.linalg.norm(proj @ psi - term)))
        norm = float(np.linalg.norm(term))
        probs.append(norm ** 2)
        states.append(StateVector(term / norm) if norm > tol else None)
    r_expand = max(r_expand, float(np.linalg.norm(psi - sum(np.kron(basis[:, n], etas[n])
                                                                 for n in range(d1)))))
    table = np.array([[abs(np.vdot(np.kron(basis[:, n], xi), psi)) ** 2 for xi in xis]
                      for n in range(d1)])
    obs_c = observable_from_basis(basis, values_c)
    rho = np.outer(psi, psi.conj())
    dims = [d1, d2]
    luders = successive_joint(luders_instrument(lift(obs_c, dims, 0)), lift(obs_d, dims, 1), rho)
    residuals = {
        "expansion": r_expand,
        "luders_table": float(np.max(np.abs(luders.table - table))),
        "product_formula": float(np.max(np.abs(product_formula(obs_c, obs_d, rho) - table))),
    }
    return EPRReduction(etas, states, np.array(probs), table, residuals, tol)
