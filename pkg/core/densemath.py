"""
Dense complex linear algebra for registers of at most four qubits.

Subsystem ordering convention: the first entry of a dimension list is the most
significant tensor factor, so ``tensor(a, b)`` places ``a`` first.
"""
import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from config import settings
from core.errors import DimensionError, NonHermitianError, NonUnitaryError

logger = logging.getLogger(__name__)

MAX_DIMENSION = 16

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class EigenSystem:
    """
    Ascending eigenvalues with the matching orthonormal eigenvector columns
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def projector(self, index: int) -> np.ndarray:
        v = self.eigenvectors[:, index]
        return np.outer(v, v.conj())


def as_matrix(value: Any) -> np.ndarray:
    """
    Accept raw arrays as well as value objects exposing a ``matrix`` attribute
    """
    matrix = getattr(value, "matrix", value)
    return np.asarray(matrix, dtype=complex)


def _check_finite(m: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(m)):
        raise DimensionError(f"{name} has non-finite entries", details={"shape": m.shape})


def _check_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square", details={"shape": m.shape})


def tensor(a: Any, b: Any) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _check_finite(a, "left operand")
    _check_finite(b, "right operand")
    if a.shape[0] * b.shape[0] > MAX_DIMENSION:
        raise DimensionError(
            "Tensor product exceeds the supported register size",
            details={"left": a.shape, "right": b.shape, "max_dimension": MAX_DIMENSION}
        )
    return np.kron(a, b)


def partial_trace(rho: Any, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """
    Reduced operator on the subsystems in ``keep``.

    The kept subsystems come out in their original relative order. An empty
    ``keep`` returns the full trace as a 1x1 matrix.
    """
    rho = as_matrix(rho)
    _check_square(rho, "rho")
    dims = [int(d) for d in dims]
    total = int(np.prod(dims))
    if total != rho.shape[0]:
        raise DimensionError(
            "Subsystem dimensions do not match the operator",
            details={"dims": dims, "shape": rho.shape}
        )
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError("Kept subsystem index out of range", details={"keep": keep, "subsystems": n})
    if len(keep) == n:
        return rho.copy()

    letters = "abcdefghijklmnopqrstuvwxyz"
    rows = [letters[i] for i in range(n)]
    cols = [letters[i] if i not in keep else letters[n + i] for i in range(n)]
    out = "".join(rows[i] for i in keep) + "".join(cols[i] for i in keep)
    subscripts = "".join(rows) + "".join(cols) + "->" + out
    reduced = np.einsum(subscripts, rho.reshape(dims + dims))
    kept_dim = int(np.prod([dims[i] for i in keep])) if keep else 1
    return reduced.reshape(kept_dim, kept_dim)


def hermiticity_defect(h: Any) -> float:
    h = as_matrix(h)
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def eigh(h: Any, tol: Optional[float] = None) -> EigenSystem:
    """
    Hermitian eigendecomposition with a fixed phase convention.

    Each eigenvector is rotated so its largest-magnitude component is real and
    positive (first such component on ties), which makes outcome labels
    reproducible for identical input.
    """
    h = as_matrix(h)
    _check_square(h, "h")
    _check_finite(h, "h")
    tol = settings.HERMITICITY_TOLERANCE if tol is None else tol
    defect = hermiticity_defect(h)
    if defect > tol:
        raise NonHermitianError(details={"defect": defect, "tolerance": tol})

    values, vectors = np.linalg.eigh((h + h.conj().T) / 2)
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        magnitudes = np.abs(column)
        pivot = int(np.flatnonzero(magnitudes >= magnitudes.max() - 1e-12)[0])
        phase = column[pivot] / magnitudes[pivot]
        vectors[:, j] = column * np.conj(phase)
    return EigenSystem(eigenvalues=values.real, eigenvectors=vectors)


def is_unitary(u: Any, tol: float = 1e-10) -> bool:
    u = as_matrix(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or not np.all(np.isfinite(u)):
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) < tol


def require_unitary(u: Any, name: str = "operator", tol: float = 1e-10) -> np.ndarray:
    u = as_matrix(u)
    if not is_unitary(u, tol):
        defect = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) if u.ndim == 2 and u.shape[0] == u.shape[1] else float("inf")
        raise NonUnitaryError(f"{name} is not unitary", details={"defect": defect, "tolerance": tol})
    return u


def dephase(rho: Any, basis: Any) -> np.ndarray:
    """
    Remove every off-diagonal element of ``rho`` in the given orthonormal basis
    """
    rho = as_matrix(rho)
    basis = as_matrix(basis)
    _check_square(rho, "rho")
    if basis.shape != rho.shape:
        raise DimensionError("Basis does not span the operator space", details={"rho": rho.shape, "basis": basis.shape})
    require_unitary(basis, "dephasing basis")
    populations = np.real(np.einsum("ik,ij,jk->k", basis.conj(), rho, basis))
    return (basis * populations) @ basis.conj().T


def dephase_subsystem(rho: Any, dims: Sequence[int], target: int, basis: Any) -> np.ndarray:
    """
    Dephase only subsystem ``target`` in ``basis``: sum_k P_k rho P_k with P_k = |k><k| on that factor
    """
    rho = as_matrix(rho)
    basis = require_unitary(basis, "dephasing basis")
    out = np.zeros_like(rho)
    for k in range(basis.shape[1]):
        projector = embed_operator(np.outer(basis[:, k], basis[:, k].conj()), dims, [target])
        out += projector @ rho @ projector
    return out


def basis_populations(rho: Any, basis: Any) -> np.ndarray:
    rho, basis = as_matrix(rho), as_matrix(basis)
    return np.real(np.einsum("ik,ij,jk->k", basis.conj(), rho, basis))


def trace_distance(a: Any, b: Any) -> float:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError("Trace distance needs equal dimensions", details={"left": a.shape, "right": b.shape})
    diff = a - b
    values = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(0.5 * np.sum(np.abs(values)))


def embed_operator(op: Any, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    """
    Full-register operator acting as ``op`` on ``targets`` (in that order) and as
    identity on the remaining subsystems.
    """
    op = as_matrix(op)
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    n = len(dims)
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise DimensionError("Invalid target subsystems", details={"targets": targets, "subsystems": n})
    target_dim = int(np.prod([dims[t] for t in targets]))
    if op.shape != (target_dim, target_dim):
        raise DimensionError(
            "Operator does not match the target subsystems",
            details={"operator": op.shape, "targets": targets, "dims": dims}
        )
    total = int(np.prod(dims))
    if total > MAX_DIMENSION:
        raise DimensionError("Register exceeds the supported size", details={"dims": dims})

    rest = [i for i in range(n) if i not in targets]
    order = targets + rest
    rest_dim = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(op, np.eye(rest_dim, dtype=complex))
    inverse = list(np.argsort(order))
    axes = inverse + [n + k for k in inverse]
    shape = [dims[o] for o in order]
    return full.reshape(shape + shape).transpose(axes).reshape(total, total)


def apply_unitary(rho: Any, u: Any, dims: Sequence[int], targets: Sequence[int]) -> np.ndarray:
    full = embed_operator(u, dims, targets)
    return full @ as_matrix(rho) @ full.conj().T


def global_phase_distance(a: Any, b: Any) -> float:
    """
    Max-abs deviation between ``a`` and ``b`` after the best global phase alignment
    """
    a, b = as_matrix(a), as_matrix(b)
    if a.shape != b.shape:
        raise DimensionError("Operators differ in shape", details={"left": a.shape, "right": b.shape})
    overlap = np.vdot(a, b)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-15 else 1.0
    return float(np.max(np.abs(a * phase - b)))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    """
    Ginibre-ensemble density matrix; full rank unless ``rank`` is given
    """
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return np.asarray(unitary_group.rvs(dim, random_state=rng), dtype=complex)
