"""Indirect measurement models and the instruments they induce.

A model couples the system ``H`` (dimension ``d``) to a probe ``K``
(dimension ``k``) prepared in ``sigma``, lets them evolve by a unitary ``U``
on ``H (x) K`` (system factor first), and reads out a probe observable ``M``.
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ModelError, OpMeasureError
from .instruments import Instrument, Superoperator, apply
from .linalg import (
    TOL,
    as_matrix,
    dagger,
    frozen,
    is_unitary,
    ket,
    operator_basis,
    opnorm,
    partial_trace,
    permute_subsystems,
    projector,
)
from .observables import DensityOperator, DiscreteObservable, as_density
from . import sampling


@dataclass(frozen=True, eq=False)
class IndirectModel:
    """Measuring process ``(K, sigma, U, M)``."""

    sys_dim: int
    probe_dim: int
    sigma: DensityOperator
    U: np.ndarray
    M: DiscreteObservable

    def __post_init__(self):
        d, k = int(self.sys_dim), int(self.probe_dim)
        if d < 1 or k < 1:
            raise ModelError("dimensions must be positive")
        try:
            sigma = as_density(self.sigma)
            u = as_matrix(self.U, square=True)
        except OpMeasureError as exc:
            raise ModelError(f"invalid probe state or interaction: {exc}") from exc
        if sigma.dim != k:
            raise ModelError(f"probe state has dim {sigma.dim}, probe dim is {k}")
        if u.shape[0] != d * k:
            raise ModelError(f"interaction has dim {u.shape[0]}, expected {d * k}")
        if not is_unitary(u):
            raise ModelError("interaction is not unitary")
        if not isinstance(self.M, DiscreteObservable) or self.M.dim != k:
            raise ModelError("probe observable must be a DiscreteObservable on the probe")
        object.__setattr__(self, "sys_dim", d)
        object.__setattr__(self, "probe_dim", k)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "U", frozen(u))

    @property
    def dims(self) -> list[int]:
        return [self.sys_dim, self.probe_dim]

    def evolve(self, rho) -> np.ndarray:
        """``U (rho (x) sigma) U^dag`` on the composite space."""
        return self.U @ np.kron(rho, self.sigma.matrix) @ dagger(self.U)

    def probe_projection(self, i: int) -> np.ndarray:
        """``I (x) E^M{m_i}``."""
        return np.kron(np.eye(self.sys_dim), self.M.projections[i])


def instrument_from_model(model: IndirectModel) -> Instrument:
    """Operation-valued measure of a model.

    Branch ``i`` maps ``rho`` to ``Tr_K[(I (x) E^M{m_i}) U (rho (x) sigma) U^dag]``.
    Outcome values are those of the probe observable.
    """
    branches = []
    for i in range(len(model.M)):
        proj = model.probe_projection(i)
        branches.append(Superoperator.from_map(
            lambda rho, proj=proj: partial_trace(proj @ model.evolve(rho), model.dims, 0),
            model.sys_dim))
    return Instrument(model.M.values, tuple(branches))


def model_nonselective(model: IndirectModel, rho) -> np.ndarray:
    """``Tr_K[U (rho (x) sigma) U^dag]``."""
    return partial_trace(model.evolve(rho), model.dims, 0)


def model_dual(model: IndirectModel, x) -> np.ndarray:
    """Heisenberg-picture nonselective operation ``Tr_K[U^dag (X (x) I) U (I (x) sigma)]``."""
    x = as_matrix(x, square=True)
    big = dagger(model.U) @ np.kron(x, np.eye(model.probe_dim)) @ model.U
    return partial_trace(big @ np.kron(np.eye(model.sys_dim), model.sigma.matrix), model.dims, 0)


def model_kraus(model: IndirectModel, i: int) -> list[np.ndarray]:
    """Kraus operators ``sqrt(p_s) (I (x) <e_l|) U (I (x) |s>)`` of branch ``i``.

    ``sigma = sum_s p_s |s><s|`` and ``e_l`` runs over an orthonormal basis of
    the range of ``E^M{m_i}``.
    """
    d = model.sys_dim
    p_vals, s_vecs = np.linalg.eigh(model.sigma.matrix)
    e_vals, e_vecs = np.linalg.eigh(model.M.projections[i])
    eye = np.eye(d)
    ops = []
    for ps, s in zip(p_vals, s_vecs.T):
        if ps <= 1e-14:
            continue
        for ev, e in zip(e_vals, e_vecs.T):
            if ev < 0.5:
                continue
            left = np.kron(eye, e.conj()[None, :])
            right = np.kron(eye, s[:, None])
            ops.append(np.sqrt(ps) * left @ model.U @ right)
    if not ops:
        ops.append(np.zeros((d, d)))
    return ops


# ---------------------------------------------------------------------------
# builders


def number_observable(d: int, values: Sequence[float] | None = None) -> DiscreteObservable:
    """``N = sum_n n |n><n|`` (or custom values on the computational basis)."""
    values = list(range(d)) if values is None else list(values)
    return DiscreteObservable(tuple(values), tuple(projector(ket(d, n)) for n in range(d)))


def swap(d1: int, d2: int) -> np.ndarray:
    """``|a> (x) |b>  ->  |b> (x) |a>`` from ``H_{d1} (x) H_{d2}`` to ``H_{d2} (x) H_{d1}``."""
    s = np.zeros((d1 * d2, d1 * d2))
    for a in range(d1):
        for b in range(d2):
            s[b * d1 + a, a * d2 + b] = 1.0
    return s


def shift(k: int, n: int = 1) -> np.ndarray:
    """Cyclic shift ``|j> -> |j + n mod k>``."""
    return np.roll(np.eye(k), n, axis=0)


def photon_counter_model(d: int, values: Sequence[float] | None = None) -> IndirectModel:
    """Counter that absorbs every photon: ``|n> (x) |0> -> |0> (x) |n>``.

    The interaction is the swap of system and probe (probe dimension ``d``),
    the probe starts in ``|0>`` and is read out in the number basis.
    """
    sigma = DensityOperator(projector(ket(d, 0)))
    return IndirectModel(d, d, sigma, swap(d, d), number_observable(d, values))


def repeatable_model(obs: DiscreteObservable, phases: Sequence[float] | None = None) -> IndirectModel:
    """Model with ``|phi> (x) |0> -> e^{i theta_n} |phi> (x) |n>`` for ``phi`` in eigenspace ``n``.

    ``U = sum_n e^{i theta_n} E^A{a_n} (x) S^n`` with ``S`` the cyclic shift on a
    probe of dimension ``len(obs)``; the probe observable carries the values
    of ``obs``.  The induced instrument is the projection-postulate
    instrument of ``obs`` whatever the phases.
    """
    n_out = len(obs)
    phases = [0.0] * n_out if phases is None else list(phases)
    if len(phases) != n_out:
        raise ModelError(f"{len(phases)} phases for {n_out} outcomes")
    u = sum(np.exp(1j * th) * np.kron(p, shift(n_out, n))
            for n, (th, p) in enumerate(zip(phases, obs.projections)))
    sigma = DensityOperator(projector(ket(n_out, 0)))
    return IndirectModel(obs.dim, n_out, sigma, u, number_observable(n_out, obs.values))


def measuring_model(obs: DiscreteObservable, post: Sequence | None = None,
                    env_state=None) -> IndirectModel:
    """General model measuring ``obs``: record the outcome, then act on the system.

    The probe is a pointer of dimension ``len(obs)`` times an environment
    prepared in ``env_state`` (default: trivial, dimension 1).  First the
    outcome is copied into the pointer by a controlled shift; then, if the
    pointer reads ``n``, the unitary ``post[n]`` acts on system (x) environment.
    The induced branches are
    ``rho -> Tr_env[W_n (E_n rho E_n (x) env_state) W_n^dag]``.
    """
    d, n_out = obs.dim, len(obs)
    env = np.eye(1) if env_state is None else as_density(env_state).matrix
    e = env.shape[0]
    post = [np.eye(d * e)] * n_out if post is None else [as_matrix(w, square=True) for w in post]
    if len(post) != n_out or any(w.shape[0] != d * e for w in post):
        raise ModelError(f"need {n_out} unitaries of dimension {d * e}")
    record = sum(np.kron(np.kron(p, shift(n_out, n)), np.eye(e))
                 for n, p in enumerate(obs.projections))
    # controlled action laid out as (system, env, pointer), then reordered
    ctrl = sum(np.kron(w, projector(ket(n_out, n))) for n, w in enumerate(post))
    ctrl = permute_subsystems(ctrl, [d, e, n_out], [0, 2, 1])
    pointer = number_observable(n_out, obs.values)
    m = DiscreteObservable(obs.values, tuple(np.kron(p, np.eye(e)) for p in pointer.projections))
    sigma = DensityOperator(np.kron(projector(ket(n_out, 0)), env))
    return IndirectModel(d, n_out * e, sigma, ctrl @ record, m)


def local_extension(model: IndirectModel, other_dim: int, position: int = 0) -> IndirectModel:
    """Let a model of one subsystem act on a bipartite system.

    ``position=0``: the model acts on ``S1`` of ``S1 (x) S2`` with ``dim S2 =
    other_dim``; ``position=1``: it acts on ``S2`` and ``dim S1 = other_dim``.
    The composite ordering is ``S1 (x) S2 (x) K``.
    """
    d, k = model.sys_dim, model.probe_dim
    if position == 0:
        u = permute_subsystems(np.kron(model.U, np.eye(other_dim)), [d, k, other_dim], [0, 2, 1])
    elif position == 1:
        u = np.kron(np.eye(other_dim), model.U)
    else:
        raise DimensionError("position must be 0 or 1")
    return IndirectModel(d * other_dim, k, model.sigma, u, model.M)


def random_model(d: int, k: int, rng: np.random.Generator, pure: bool = False,
                 outcomes: int | None = None) -> IndirectModel:
    """Haar-random interaction, random probe state and random probe observable."""
    if pure:
        sigma = projector(sampling.random_vector(k, rng))
    else:
        sigma = sampling.random_density(k, rng)
    m = sampling.random_observable(k, rng, outcomes or min(k, int(rng.integers(2, k + 1))))
    return IndirectModel(d, k, DensityOperator(sigma), sampling.random_unitary(d * k, rng), m)


def random_measuring_model(obs: DiscreteObservable, rng: np.random.Generator,
                           env_dim: int = 1, pure: bool = True) -> IndirectModel:
    """Random model measuring ``obs`` with Haar-random post-measurement unitaries."""
    d = obs.dim
    post = [sampling.random_unitary(d * env_dim, rng) for _ in range(len(obs))]
    if pure:
        env = projector(sampling.random_vector(env_dim, rng))
    else:
        env = sampling.random_density(env_dim, rng)
    return measuring_model(obs, post, env)


# ---------------------------------------------------------------------------
# derivation cross-checks


def derivation_residuals(model: IndirectModel, samples: int = 8, seed: int = 0,
                         obs: DiscreteObservable | None = None) -> dict[str, float]:
    """Compare the induced instrument with the alternative derivations.

    ``sandwiched_posterior``: conditional states with the probe projection on
    both sides, as a projection-postulate readout of the probe would give.
    ``joint_probability``: ``Tr[(Y (x) E^M) U(rho (x) sigma)U^dag]`` against
    ``Tr[Y X(delta) rho]`` for ``Y`` over a full operator basis.
    ``factored_forms``: the conditional state written through the measured
    observable ``obs`` (``rho E``, ``E rho``, ``E rho E`` inside the
    nonselective operation); requires the model to measure ``obs``.
    """
    rng = np.random.default_rng(seed)
    d = model.sys_dim
    instr = instrument_from_model(model)
    res = {"sandwiched_posterior": 0.0, "joint_probability": 0.0}
    if obs is not None:
        res["factored_forms"] = 0.0
    states = [sampling.random_density(d, rng) for _ in range(samples)]
    for rho in states:
        big = model.evolve(rho)
        for i in range(len(model.M)):
            proj = model.probe_projection(i)
            p, post = apply(instr, [i], rho)
            for y in operator_basis(d):
                lhs = np.trace(np.kron(y, model.M.projections[i]) @ big)
                rhs = np.trace(y @ instr.branches[i](rho))
                res["joint_probability"] = max(res["joint_probability"], abs(lhs - rhs))
            if post is None:
                continue
            sand = partial_trace(proj @ big @ proj, model.dims, 0)
            sand = sand / np.trace(sand)
            res["sandwiched_posterior"] = max(res["sandwiched_posterior"],
                                              opnorm(post.matrix - sand))
            if obs is not None:
                j = obs.index_of(model.M.values[i])
                e = obs.projections[j] if j is not None else np.zeros((d, d))
                pa = np.real(np.trace(e @ rho))
                if pa <= TOL:
                    continue
                forms = [instr.branches[i](rho),
                         model_nonselective(model, rho @ e),
                         model_nonselective(model, e @ rho),
                         model_nonselective(model, e @ rho @ e)]
                for f in forms:
                    res["factored_forms"] = max(res["factored_forms"],
                                                opnorm(post.matrix - f / pa))
    return res
