"""Apparatus classification: repeatability, projection postulate, minimum disturbance.

Minimum disturbance is decided twice.  The primary verdict compares every
branch with the projection-postulate branch ``P rho P``.  The second one
works from the definition: an apparatus measuring ``A`` is minimum
disturbing when it leaves every observable commuting with ``A`` undisturbed,
i.e. when ``T*`` fixes the whole commutant of ``A``.  The two must agree; a
mismatch is reported as a theorem violation.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .instruments import Instrument, aligned_operations
from .linalg import TOL, dagger, matrix_unit, opnorm
from .observables import DiscreteObservable, commutes
from .successive import disturbs, is_simultaneous
from . import sampling

Candidates = Sequence[DiscreteObservable] | Mapping[str, DiscreteObservable]


def _named(candidates: Candidates) -> list[tuple[str, DiscreteObservable]]:
    if isinstance(candidates, Mapping):
        return [(str(k), v) for k, v in candidates.items()]
    return [(str(i), c) for i, c in enumerate(candidates)]


def _test_states(d: int, samples: int, seed: int) -> list[np.ndarray]:
    # matrix units span every input; random states add physically typical cases
    rng = np.random.default_rng(seed)
    units = [matrix_unit(d, i, j) for i in range(d) for j in range(d)]
    return units + [sampling.random_density(d, rng) for _ in range(samples)]


@dataclass
class Verdict:
    """A boolean decision with the residual it rests on and a failing case."""

    holds: bool
    residual: float
    witness: dict | None = None

    def __bool__(self) -> bool:
        return self.holds

    def to_dict(self) -> dict:
        return {"holds": self.holds, "residual": self.residual, "witness": self.witness}


def satisfies_repeatability(instr: Instrument, obs: DiscreteObservable, samples: int = 8,
                            seed: int = 0, tol: float = TOL) -> Verdict:
    """Does an immediate repetition of ``obs`` reproduce the recorded outcome?

    Checks ``Tr[E^A{a_m} X{a_n} rho] = 0`` for ``m != n`` and
    ``Tr[E^A{a_n} X{a_n} rho] = Tr[X{a_n} rho]`` over matrix units and
    random states.  The witness names the first outcome, the outcome the
    repetition can produce instead, and the state index.
    """
    ops = aligned_operations(instr, obs, tol)
    worst, witness = 0.0, None
    for k, rho in enumerate(_test_states(instr.dim, samples, seed)):
        for n, x in enumerate(ops):
            post = x(rho)
            total = np.trace(post)
            for m, q in enumerate(obs.projections):
                val = np.trace(q @ post)
                r = abs(val - total) if m == n else abs(val)
                if r > worst:
                    worst = float(r)
                    witness = {"outcome": obs.values[n], "repeat_outcome": obs.values[m],
                               "state_index": k, "probability": float(np.real(val))}
    ok = worst <= tol
    return Verdict(ok, worst, None if ok else witness)


def satisfies_projection_postulate(instr: Instrument, obs: DiscreteObservable,
                                   tol: float = TOL) -> Verdict:
    """Is every branch equal to ``rho -> E^A{a_n} rho E^A{a_n}``?

    Compared on the matrix-unit basis, so this is equality of superoperators.
    """
    ops = aligned_operations(instr, obs, tol)
    d = instr.dim
    worst, witness = 0.0, None
    for n, (x, p) in enumerate(zip(ops, obs.projections)):
        for i in range(d):
            for j in range(d):
                e = matrix_unit(d, i, j)
                r = opnorm(x(e) - p @ e @ p)
                if r > worst:
                    worst, witness = r, {"outcome": obs.values[n], "basis_element": [i, j]}
    ok = worst <= tol
    return Verdict(ok, worst, None if ok else witness)


def disturbed_set(instr: Instrument, candidates: Candidates, tol: float = TOL):
    """The candidates whose statistics the nonselective state change perturbs.

    Returns a list for sequence input and a dict for mapping input.
    """
    named = _named(candidates)
    for _, c in named:
        if c.dim != instr.dim:
            raise DimensionError(f"candidate of dim {c.dim} for instrument of dim {instr.dim}")
    hit = [(k, c) for k, c in named if disturbs(instr, c, tol=tol).disturbed]
    if isinstance(candidates, Mapping):
        return dict(hit)
    return [c for _, c in hit]


def _eigenspace_basis(p: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(p)
    return vecs[:, vals > 0.5]


def commutant_residual(instr: Instrument, obs: DiscreteObservable) -> tuple[float, dict | None]:
    """``max ||T*(Y) - Y||`` over a basis ``Y`` of the commutant of ``obs``.

    The commutant of a sharp observable is spanned by ``u_i u_j^dag`` with
    ``u_i, u_j`` running over an orthonormal basis of one eigenspace.
    """
    t_dual = instr.total().dual()
    worst, witness = 0.0, None
    for n, p in enumerate(obs.projections):
        u = _eigenspace_basis(p)
        for i in range(u.shape[1]):
            for j in range(u.shape[1]):
                y = np.outer(u[:, i], u[:, j].conj())
                r = opnorm(t_dual(y) - y)
                if r > worst:
                    worst, witness = r, {"eigenspace": obs.values[n], "element": [i, j]}
    return worst, witness


@dataclass
class ClassificationReport:
    repeatable: bool
    projective: bool
    minimum_disturbing: bool
    residuals: dict[str, float]
    witnesses: dict[str, object]
    disturbed: list[str] = field(default_factory=list)
    theorem_violations: list[dict] = field(default_factory=list)

    @property
    def consistent(self) -> bool:
        return not self.theorem_violations

    def to_dict(self) -> dict:
        return {
            "repeatable": self.repeatable,
            "projective": self.projective,
            "minimum_disturbing": self.minimum_disturbing,
            "residuals": dict(self.residuals),
            "witnesses": dict(self.witnesses),
            "disturbed": list(self.disturbed),
            "theorem_violations": list(self.theorem_violations),
        }


def is_minimum_disturbing(instr: Instrument, obs: DiscreteObservable,
                          candidates: Candidates = (), samples: int = 8, seed: int = 0,
                          tol: float = TOL) -> ClassificationReport:
    """Classify an apparatus measuring ``obs``.

    ``minimum_disturbing`` is the projection-postulate verdict.  Evidence
    checked alongside it:

    * ``T*`` fixes the commutant of ``obs`` iff the verdict is true;
    * a candidate not commuting with ``obs`` is always disturbed;
    * under a true verdict, commuting candidates are undisturbed and are
      measured simultaneously with ``obs``.

    Any contradiction lands in ``theorem_violations``.  When the verdict is
    false, the witness prefers a commuting candidate that is disturbed.
    """
    rep = satisfies_repeatability(instr, obs, samples, seed, tol)
    proj = satisfies_projection_postulate(instr, obs, tol)
    comm_res, comm_wit = commutant_residual(instr, obs)
    fixes_commutant = comm_res <= tol
    residuals = {"repeatability": rep.residual, "projection_postulate": proj.residual,
                 "commutant": comm_res}
    witnesses: dict[str, object] = {}
    if rep.witness:
        witnesses["repeatability"] = rep.witness
    if proj.witness:
        witnesses["projection_postulate"] = proj.witness
    violations = []
    if fixes_commutant != proj.holds:
        violations.append({"kind": "characterization_mismatch", "projective": proj.holds,
                           "commutant_residual": comm_res})
    if proj.holds and not rep.holds:
        violations.append({"kind": "projective_not_repeatable"})
    disturbed, commuting_disturbed = [], None
    for name, c in _named(candidates):
        if c.dim != instr.dim:
            raise DimensionError(f"candidate {name} has dim {c.dim}, instrument {instr.dim}")
        d = disturbs(instr, c, tol=tol)
        com = commutes(obs, c, tol)
        if d.disturbed:
            disturbed.append(name)
        if not com and not d.disturbed:
            violations.append({"kind": "noncommuting_undisturbed", "candidate": name})
        if com and d.disturbed and commuting_disturbed is None:
            commuting_disturbed = {"candidate": name, "outcome": d.worst_outcome,
                                   "residual": d.residual}
        if com and proj.holds:
            if d.disturbed:
                violations.append({"kind": "projective_disturbs_commuting", "candidate": name})
            if not is_simultaneous(instr, c, obs, samples, seed, tol).simultaneous:
                violations.append({"kind": "projective_not_simultaneous", "candidate": name})
    if not proj.holds:
        if commuting_disturbed is not None:
            witnesses["commuting_disturbed"] = commuting_disturbed
        elif comm_wit is not None:
            witnesses["commutant_moved"] = comm_wit
    return ClassificationReport(rep.holds, proj.holds, proj.holds, residuals, witnesses,
                                disturbed, violations)


def conditional_posteriors(instr: Instrument, obs: DiscreteObservable, rho,
                           tol: float = TOL) -> list[np.ndarray | None]:
    """Normalized ``X{a_n} rho / Tr[X{a_n} rho]``; ``None`` for null outcomes."""
    ops = aligned_operations(instr, obs, tol)
    rho = np.asarray(rho, dtype=np.complex128)
    out = []
    for x in ops:
        post = x(rho)
        p = np.real(np.trace(post))
        out.append(None if p <= tol else (post + dagger(post)) / (2 * p))
    return out
