import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.special import expit

from config import settings
from core import densemath
from core.errors import DimensionError, InvalidStateError, ParameterRegimeError

logger = logging.getLogger(__name__)


class QubitHamiltonian(BaseModel):
    """
    H = E|1><1| on a single qubit, ground energy 0
    """
    model_config = ConfigDict(frozen=True)

    excited_energy: float

    @field_validator("excited_energy")
    @classmethod
    def finite_energy(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError("excited_energy must be finite")
        return v

    @property
    def matrix(self) -> np.ndarray:
        return np.diag([0.0, self.excited_energy]).astype(complex)

    def thermal_populations(self, beta: float) -> np.ndarray:
        """
        (ground, excited) Boltzmann populations at inverse temperature ``beta``
        """
        if not np.isfinite(beta) or beta < 0:
            raise ParameterRegimeError(
                "Inverse temperature must be finite and nonnegative",
                details={"beta": beta}
            )
        x = beta * self.excited_energy
        return np.array([expit(x), expit(-x)])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Validated density operator with named tensor factors.

    The stored matrix is the Hermitian part of the input and is read-only.
    """
    matrix: np.ndarray
    subsystem_dims: Tuple[int, ...]
    labels: Tuple[str, ...]

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dims = tuple(int(d) for d in self.subsystem_dims)
        labels = tuple(str(label) for label in self.labels)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("Density matrix must be square", details={"shape": m.shape})
        if int(np.prod(dims)) != m.shape[0]:
            raise DimensionError("Subsystem dimensions do not match", details={"dims": dims, "shape": m.shape})
        if len(labels) != len(dims) or len(set(labels)) != len(labels):
            raise DimensionError("Labels must be unique and match the subsystems", details={"labels": labels, "dims": dims})
        if not np.all(np.isfinite(m)):
            raise InvalidStateError("Density matrix has non-finite entries")

        tol = settings.STATE_TOLERANCE
        defect = densemath.hermiticity_defect(m)
        if defect > tol:
            raise InvalidStateError("Density matrix is not Hermitian", details={"defect": defect, "tolerance": tol})
        m = (m + m.conj().T) / 2
        trace = float(np.trace(m).real)
        if abs(trace - 1.0) > tol:
            raise InvalidStateError("Density matrix trace differs from 1", details={"trace": trace, "tolerance": tol})
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < -tol:
            raise InvalidStateError("Density matrix is not positive semidefinite", details={"min_eigenvalue": min_eig, "tolerance": tol})

        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "subsystem_dims", dims)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index(self, label: str) -> int:
        if label not in self.labels:
            raise DimensionError(f"Subsystem {label} not present", details={"labels": self.labels})
        return self.labels.index(label)

    def reduce(self, labels: Sequence[str]) -> "DensityMatrix":
        """
        Marginal on ``labels``; kept factors stay in this state's order
        """
        keep = sorted(self.index(label) for label in labels)
        reduced = densemath.partial_trace(self.matrix, self.subsystem_dims, keep)
        return DensityMatrix(
            reduced,
            tuple(self.subsystem_dims[k] for k in keep),
            tuple(self.labels[k] for k in keep)
        )

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix)).copy()

    def eigensystem(self) -> densemath.EigenSystem:
        return densemath.eigh(self.matrix)

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(
            densemath.tensor(self.matrix, other.matrix),
            self.subsystem_dims + other.subsystem_dims,
            self.labels + other.labels
        )

    def evolve(self, u: np.ndarray, targets: Sequence[str]) -> "DensityMatrix":
        indices = [self.index(label) for label in targets]
        evolved = densemath.apply_unitary(self.matrix, u, self.subsystem_dims, indices)
        return DensityMatrix(evolved, self.subsystem_dims, self.labels)

    def dephased(self, basis: np.ndarray) -> "DensityMatrix":
        return DensityMatrix(densemath.dephase(self.matrix, basis), self.subsystem_dims, self.labels)

    def dephased_subsystem(self, label: str, basis: np.ndarray) -> "DensityMatrix":
        matrix = densemath.dephase_subsystem(self.matrix, self.subsystem_dims, self.index(label), basis)
        return DensityMatrix(matrix, self.subsystem_dims, self.labels)

    def relabel(self, labels: Sequence[str]) -> "DensityMatrix":
        return DensityMatrix(self.matrix, self.subsystem_dims, tuple(labels))

    def reorder(self, labels: Sequence[str]) -> "DensityMatrix":
        """
        Same state with tensor factors permuted into ``labels`` order
        """
        order = [self.index(label) for label in labels]
        if sorted(order) != list(range(len(self.labels))):
            raise DimensionError("Reorder must name every subsystem once", details={"labels": labels})
        n = len(order)
        dims = list(self.subsystem_dims)
        axes = order + [n + k for k in order]
        permuted = self.matrix.reshape(dims + dims).transpose(axes).reshape(self.dim, self.dim)
        return DensityMatrix(permuted, tuple(dims[k] for k in order), tuple(labels))
