"""
Constructors for the system-memory and reservoir state families.

All two-qubit outputs are labelled (S, M) with S the most significant factor.
"""
import logging
from typing import Optional, Sequence

import numpy as np

from config import settings
from core.errors import InvalidStateError, ParameterRegimeError
from models.configs import CorrelationFamily
from models.quantum import DensityMatrix, QubitHamiltonian

logger = logging.getLogger(__name__)

SM_DIMS = (2, 2)
SM_LABELS = ("S", "M")


def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ParameterRegimeError("Population p must lie in (0, 1)", details={"p": p})


def _check_noise(eps: float, name: str) -> None:
    if not 0.0 <= eps <= 1.0:
        raise ParameterRegimeError(f"{name} must lie in [0, 1]", details={name: eps})


def thermal_state(h: QubitHamiltonian, beta: float, label: str = "R") -> DensityMatrix:
    populations = h.thermal_populations(beta)
    return DensityMatrix(np.diag(populations).astype(complex), (2,), (label,))


def classical_corr_state(p: float, eps_c: float) -> DensityMatrix:
    _check_probability(p)
    _check_noise(eps_c, "eps_c")
    mix = eps_c * p * (1 - p)
    diagonal = np.array([p - mix, mix, mix, 1 - p - mix])
    negative = np.flatnonzero(diagonal < -settings.STATE_TOLERANCE)
    if negative.size:
        index = int(negative[0])
        raise InvalidStateError(
            "Classically correlated state has a negative population",
            details={"entry": index, "value": float(diagonal[index]), "p": p, "eps_c": eps_c}
        )
    return DensityMatrix(np.diag(diagonal).astype(complex), SM_DIMS, SM_LABELS)


def quantum_corr_state(p: float, eps_q: float) -> DensityMatrix:
    """
    sqrt(p)|00> + sqrt(1-p)|11> with its |00><11| coherence scaled by 1 - eps_q
    """
    _check_probability(p)
    _check_noise(eps_q, "eps_q")
    coherence = (1 - eps_q) * np.sqrt(p * (1 - p))
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = p
    m[3, 3] = 1 - p
    m[0, 3] = m[3, 0] = coherence
    return DensityMatrix(m, SM_DIMS, SM_LABELS)


def product_state(p: float) -> DensityMatrix:
    _check_probability(p)
    single = np.diag([p, 1 - p]).astype(complex)
    return DensityMatrix(np.kron(single, single), SM_DIMS, SM_LABELS)


def correlated_state(family: CorrelationFamily, default_beta_times_e: Optional[float] = None) -> DensityMatrix:
    p = family.resolve_p(default_beta_times_e)
    if family.kind == "classical":
        return classical_corr_state(p, family.noise)
    if family.kind == "quantum":
        return quantum_corr_state(p, family.noise)
    return product_state(p)


def pure_state(vector: Sequence[complex], dims: Sequence[int], labels: Sequence[str]) -> DensityMatrix:
    psi = np.asarray(vector, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidStateError("State vector has zero norm")
    psi = psi / norm
    return DensityMatrix(np.outer(psi, psi.conj()), tuple(dims), tuple(labels))


def x_state(populations: Sequence[float], coherences: Sequence[complex]) -> DensityMatrix:
    """
    Two-qubit state supported on the diagonal and anti-diagonal only.

    ``coherences`` are the <00|rho|11> and <01|rho|10> elements. Within each
    memory value b the system coherence <0b|rho|1b> vanishes.
    """
    diagonal = np.asarray(populations, dtype=float)
    c_outer, c_inner = (complex(c) for c in coherences)
    m = np.diag(diagonal).astype(complex)
    m[0, 3], m[3, 0] = c_outer, np.conj(c_outer)
    m[1, 2], m[2, 1] = c_inner, np.conj(c_inner)
    return DensityMatrix(m, SM_DIMS, SM_LABELS)


def random_x_state(rng: np.random.Generator) -> DensityMatrix:
    """
    Full-rank X-state with uniformly drawn populations and admissible coherences
    """
    populations = rng.dirichlet(np.ones(4))
    limit_outer = np.sqrt(populations[0] * populations[3])
    limit_inner = np.sqrt(populations[1] * populations[2])
    c_outer = rng.uniform(0, 0.95) * limit_outer * np.exp(1j * rng.uniform(0, 2 * np.pi))
    c_inner = rng.uniform(0, 0.95) * limit_inner * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return x_state(populations, (c_outer, c_inner))


def random_correlated_state(rng: np.random.Generator) -> DensityMatrix:
    """
    Random member of the classical or quantum family with random weight and noise
    """
    kind = "classical" if rng.random() < 0.5 else "quantum"
    family = CorrelationFamily(kind=kind, p=float(rng.uniform(0.05, 0.95)), noise=float(rng.uniform(0.05, 1.0)))
    return correlated_state(family)
