"""Seeded random states, unitaries and observables for property checks.

Every function takes an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .linalg import dagger


def ginibre(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary (QR of a Ginibre matrix with phase fix)."""
    q, r = np.linalg.qr(ginibre(d, d, rng))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    v = ginibre(d, 1, rng)[:, 0]
    return v / np.linalg.norm(v)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix; full rank unless ``rank`` is given."""
    g = ginibre(d, rank or d, rng)
    rho = g @ dagger(g)
    rho = (rho + dagger(rho)) / 2
    return rho / np.trace(rho).real


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = ginibre(d, d, rng)
    return (g + dagger(g)) / 2


def random_partition(d: int, parts: int, rng: np.random.Generator) -> list[int]:
    """Random block sizes (each at least one) summing to ``d``."""
    cuts = np.sort(rng.choice(np.arange(1, d), size=parts - 1, replace=False)) if parts > 1 else []
    edges = [0, *cuts, d]
    return [int(edges[i + 1] - edges[i]) for i in range(parts)]


def random_observable(d: int, rng: np.random.Generator, outcomes: int | None = None,
                      values: Sequence[float] | None = None):
    """Random sharp observable with ``outcomes`` eigenspaces in a Haar basis.

    Distinct integer values are used unless ``values`` is given, so the
    spectrum never trips the clustering tolerance.
    """
    from .observables import DiscreteObservable

    outcomes = outcomes or int(rng.integers(2, d + 1))
    sizes = random_partition(d, outcomes, rng)
    u = random_unitary(d, rng)
    if values is None:
        values = [float(v) for v in rng.permutation(np.arange(-outcomes, outcomes + 1))[:outcomes]]
    projs, start = [], 0
    for s in sizes:
        v = u[:, start:start + s]
        projs.append(v @ dagger(v))
        start += s
    return DiscreteObservable(tuple(values), tuple(projs))


def random_commuting_observable(obs, rng: np.random.Generator):
    """Random observable commuting with ``obs``.

    Built from a random Hermitian matrix block-diagonal in the eigenspaces of
    ``obs``; its projections refine or coarsen nothing in particular.
    """
    from .observables import observable_from_hermitian

    h = sum(p @ random_hermitian(obs.dim, rng) @ p for p in obs.projections)
    # round the spectrum onto a coarse grid so outcome values are well separated
    vals, vecs = np.linalg.eigh(h)
    vals = np.round(vals * 2) / 2
    m = vecs @ np.diag(vals) @ dagger(vecs)
    m = sum(p @ m @ p for p in obs.projections)
    return observable_from_hermitian(m)
