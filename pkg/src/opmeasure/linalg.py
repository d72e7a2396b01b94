"""Dense complex matrix algebra used throughout the package.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Operators on composite spaces are laid out with the first factor as the
most significant index, i.e. ``np.kron(a, b)`` acts on ``H_a (x) H_b``.

Vectorization is column stacking: ``vec(M)[i + j*d] = M[i, j]``.  With this
convention ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``.  Superoperator
matrices are serialized in this convention, so it must not change.
"""
from __future__ import annotations

from collections.abc import Sequence
from functools import reduce
import math

import numpy as np

from .errors import DimensionError, HermiticityError

#: Absolute tolerance for every boolean predicate in the package.
TOL = 1e-9
#: Eigenvalues closer than this are merged into one degenerate eigenvalue.
CLUSTER_TOL = 1e-7
# components below this magnitude are ignored when fixing eigenvector phases
_PHASE_FLOOR = 1e-8


def as_matrix(m, square: bool = False) -> np.ndarray:
    """Return ``m`` as a 2-d complex128 array (copying only when needed)."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    return a


def frozen(m) -> np.ndarray:
    """Return a read-only complex copy of ``m``."""
    a = np.array(m, dtype=np.complex128)
    a.setflags(write=False)
    return a


def opnorm(m) -> float:
    """Operator (spectral) norm; the 2-norm for vectors."""
    a = np.asarray(m)
    if a.size == 0:
        return 0.0
    if a.ndim == 1:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a, 2))


def dagger(m) -> np.ndarray:
    return np.conj(np.asarray(m)).T


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    return a @ b - b @ a


def is_hermitian(m, tol: float = TOL) -> bool:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return opnorm(a - dagger(a)) <= tol


def is_unitary(m, tol: float = TOL) -> bool:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return opnorm(dagger(a) @ a - np.eye(a.shape[0])) <= tol


def is_projection(m, tol: float = TOL) -> bool:
    a = np.asarray(m)
    return is_hermitian(a, tol) and opnorm(a @ a - a) <= tol


def min_eigenvalue(m) -> float:
    """Smallest eigenvalue of the Hermitian part of ``m``."""
    a = as_matrix(m, square=True)
    return float(np.linalg.eigvalsh((a + dagger(a)) / 2)[0])


def is_positive_semidefinite(m, tol: float = TOL) -> bool:
    """Hermitian within ``tol`` and smallest eigenvalue at least ``-tol``."""
    return is_hermitian(m, tol) and min_eigenvalue(m) >= -tol


def tensor_product(*factors) -> np.ndarray:
    """Kronecker product of one or more matrices (or vectors), left to right."""
    if not factors:
        raise DimensionError("tensor_product needs at least one factor")
    return reduce(np.kron, [np.asarray(f, dtype=np.complex128) for f in factors])


def _check_split(dim: int, dims: Sequence[int]) -> list[int]:
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise DimensionError(f"subsystem dimensions must be positive, got {dims}")
    if math.prod(dims) != dim:
        raise DimensionError(
            f"subsystem dimensions {dims} do not multiply to matrix dimension {dim}")
    return dims


def partial_trace(m, dims: Sequence[int], keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``keep`` is a single subsystem index or a sequence of them; the kept
    factors appear in increasing index order in the result.
    """
    a = as_matrix(m, square=True)
    dims = _check_split(a.shape[0], dims)
    n = len(dims)
    keep = [keep] if isinstance(keep, (int, np.integer)) else list(keep)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep={keep} out of range for {n} subsystems")
    t = a.reshape(dims + dims)
    # trace from the highest axis down so remaining axis numbers stay valid
    traced = [i for i in range(n) if i not in keep]
    cur = n
    for i in reversed(traced):
        t = np.trace(t, axis1=i, axis2=i + cur)
        cur -= 1
    d = math.prod(dims[k] for k in keep)
    return t.reshape(d, d)


def permute_subsystems(m, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of an operator (or state vector).

    Factor ``i`` of the result is factor ``perm[i]`` of the input.
    """
    a = np.asarray(m, dtype=np.complex128)
    total = a.shape[0]
    dims = _check_split(total, dims)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise DimensionError(f"{perm} is not a permutation of {n} subsystems")
    if a.ndim == 1:
        return a.reshape(dims).transpose(perm).reshape(total)
    if a.shape != (total, total):
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    axes = perm + [p + n for p in perm]
    return a.reshape(dims + dims).transpose(axes).reshape(total, total)


def hermitian_eigensystem(m, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix.

    Returns real eigenvalues in descending order and a unitary whose columns
    are the matching eigenvectors.  Each eigenvector is rescaled so that its
    first component of magnitude above ``1e-8`` is real and positive, which
    makes the output reproducible for nondegenerate spectra.
    """
    a = as_matrix(m, square=True)
    if not is_hermitian(a, tol):
        raise HermiticityError(
            f"matrix is not Hermitian (||M - M^dag|| = {opnorm(a - dagger(a)):.3e})")
    vals, vecs = np.linalg.eigh((a + dagger(a)) / 2)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        idx = int(np.argmax(np.abs(col) > _PHASE_FLOOR))
        vecs[:, j] = col * (abs(col[idx]) / col[idx])
    return vals, vecs


def cluster_eigenvalues(vals: Sequence[float], gap: float = CLUSTER_TOL) -> list[list[int]]:
    """Group indices of a descending eigenvalue list into degenerate clusters."""
    clusters: list[list[int]] = []
    for i, v in enumerate(vals):
        if clusters and vals[clusters[-1][-1]] - v <= gap:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def vectorize(m) -> np.ndarray:
    """Column-stacking vectorization."""
    return as_matrix(m).reshape(-1, order="F")


def devectorize(v) -> np.ndarray:
    """Inverse of :func:`vectorize` for square matrices."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise DimensionError(f"vector length {v.size} is not a perfect square")
    return v.reshape(d, d, order="F")


def sandwich_rep(left, right) -> np.ndarray:
    """Superoperator matrix of ``X -> left @ X @ right``."""
    return np.kron(np.asarray(right).T, np.asarray(left))


def transpose_permutation(d: int) -> np.ndarray:
    """Permutation matrix ``P`` with ``P @ vec(M) == vec(M.T)``."""
    p = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            p[j + i * d, i + j * d] = 1.0
    return p


def matrix_unit(d: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def operator_basis(d: int) -> list[np.ndarray]:
    """Matrix units ``|i><j|`` in column-stacking order (spans all operators)."""
    return [matrix_unit(d, i, j) for j in range(d) for i in range(d)]


def ket(d: int, i: int) -> np.ndarray:
    v = np.zeros(d, dtype=np.complex128)
    v[i] = 1.0
    return v


def projector(v) -> np.ndarray:
    """Rank-one projector ``|v><v|`` onto the normalized vector ``v``."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())
