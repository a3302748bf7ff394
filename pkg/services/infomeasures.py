import logging
from typing import Optional

import numpy as np

from config import settings
from core.errors import DimensionError
from models.quantum import DensityMatrix

logger = logging.getLogger(__name__)


def _entropy_of_spectrum(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    kept = values[values >= settings.EIGENVALUE_FLOOR]
    return float(-np.sum(kept * np.log(kept)))


def vn_entropy(rho: DensityMatrix) -> float:
    """
    Von Neumann entropy in nats; eigenvalues below the floor contribute nothing
    """
    return _entropy_of_spectrum(np.linalg.eigvalsh(rho.matrix))


def _require_labels(rho: DensityMatrix, count: int) -> None:
    if len(rho.labels) != count:
        raise DimensionError(
            f"Expected a {count}-partite state",
            details={"labels": rho.labels}
        )


def conditional_entropy(rho_ab: DensityMatrix, condition: str = "M") -> float:
    _require_labels(rho_ab, 2)
    return vn_entropy(rho_ab) - vn_entropy(rho_ab.reduce([condition]))


def mutual_information(rho_ab: DensityMatrix) -> float:
    _require_labels(rho_ab, 2)
    a, b = rho_ab.labels
    return vn_entropy(rho_ab.reduce([a])) + vn_entropy(rho_ab.reduce([b])) - vn_entropy(rho_ab)


def conditional_mutual_information(
    rho_abc: DensityMatrix,
    first: str = "M",
    second: str = "R",
    condition: str = "S"
) -> float:
    """
    I(first:second|condition) = S(second,cond) + S(first,cond) - S(cond) - S(all)
    """
    _require_labels(rho_abc, 3)
    if {first, second, condition} != set(rho_abc.labels):
        raise DimensionError(
            "Parts must name the three subsystems",
            details={"parts": (first, second, condition), "labels": rho_abc.labels}
        )
    return (
        vn_entropy(rho_abc.reduce([second, condition]))
        + vn_entropy(rho_abc.reduce([first, condition]))
        - vn_entropy(rho_abc.reduce([condition]))
        - vn_entropy(rho_abc)
    )


def coherence_J(rho: DensityMatrix, basis: np.ndarray) -> float:
    return vn_entropy(rho.dephased(basis)) - vn_entropy(rho)


def memory_dephased(rho_sm: DensityMatrix, memory: str = "M") -> DensityMatrix:
    """
    Joint state after the memory alone is dephased in its own eigenbasis
    """
    memory_basis = rho_sm.reduce([memory]).eigensystem().eigenvectors
    return rho_sm.dephased_subsystem(memory, memory_basis)


def dephased_mutual_information(rho_sm: DensityMatrix, memory: str = "M") -> float:
    """
    Mutual information after the memory is dephased in its own eigenbasis.

    Marginals are unchanged by that dephasing, so only the joint entropy moves.
    """
    _require_labels(rho_sm, 2)
    system = next(label for label in rho_sm.labels if label != memory)
    dephased = memory_dephased(rho_sm, memory)
    return (
        vn_entropy(rho_sm.reduce([system]))
        + vn_entropy(rho_sm.reduce([memory]))
        - vn_entropy(dephased)
    )


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """
    S(rho||sigma) = Tr rho (ln rho - ln sigma); infinite when supp rho is not inside supp sigma
    """
    if rho.dim != sigma.dim:
        raise DimensionError("Relative entropy needs equal dimensions", details={"rho": rho.dim, "sigma": sigma.dim})
    floor = settings.EIGENVALUE_FLOOR
    sigma_system = sigma.eigensystem()
    weights = np.real(np.einsum(
        "ik,ij,jk->k",
        sigma_system.eigenvectors.conj(), rho.matrix, sigma_system.eigenvectors
    ))
    outside = (sigma_system.eigenvalues < floor) & (weights > floor)
    if np.any(outside):
        return float("inf")
    inside = sigma_system.eigenvalues >= floor
    cross = float(np.sum(weights[inside] * np.log(sigma_system.eigenvalues[inside])))
    return -vn_entropy(rho) - cross


def binary_entropy(p: float) -> float:
    return _entropy_of_spectrum(np.array([p, 1 - p]))


def log_operator(rho: DensityMatrix, floor: Optional[float] = None) -> np.ndarray:
    """
    Matrix logarithm of a density operator with eigenvalues clipped at ``floor``
    """
    floor = settings.EIGENVALUE_FLOOR if floor is None else floor
    system = rho.eigensystem()
    clipped = np.clip(system.eigenvalues, floor, None)
    if np.any(system.eigenvalues < floor):
        logger.warning(f"Clipping {int(np.sum(system.eigenvalues < floor))} eigenvalues below {floor} before the logarithm")
    return (system.eigenvectors * np.log(clipped)) @ system.eigenvectors.conj().T
