from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core import densemath

GateKind = Literal["ry", "s", "sdg", "h", "cnot"]

_SQRT_HALF = np.sqrt(0.5)
_FIXED_GATES = {
    "s": np.diag([1, 1j]).astype(complex),
    "sdg": np.diag([1, -1j]).astype(complex),
    "h": np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=complex),
    "cnot": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}


class Gate(BaseModel):
    """
    Ry(theta), S, S-dagger, Hadamard or CNOT(control, target) on register qubits
    """
    model_config = ConfigDict(frozen=True)

    kind: GateKind
    qubits: Tuple[int, ...]
    theta: Optional[float] = None

    @model_validator(mode="after")
    def arity(self) -> "Gate":
        expected = 2 if self.kind == "cnot" else 1
        if len(self.qubits) != expected or len(set(self.qubits)) != expected:
            raise ValueError(f"{self.kind} acts on {expected} distinct qubit(s), got {self.qubits}")
        if (self.kind == "ry") != (self.theta is not None):
            raise ValueError("Only ry carries an angle")
        return self

    @property
    def matrix(self) -> np.ndarray:
        if self.kind == "ry":
            c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        return _FIXED_GATES[self.kind]


class Circuit(BaseModel):
    width: int = Field(ge=1, le=4)
    gates: List[Gate] = []

    @model_validator(mode="after")
    def qubits_in_range(self) -> "Circuit":
        for gate in self.gates:
            if any(q < 0 or q >= self.width for q in gate.qubits):
                raise ValueError(f"Gate {gate.kind} on {gate.qubits} outside width {self.width}")
        return self

    def unitary(self) -> np.ndarray:
        dims = [2] * self.width
        u = np.eye(2 ** self.width, dtype=complex)
        for gate in self.gates:
            u = densemath.embed_operator(gate.matrix, dims, gate.qubits) @ u
        return u

    def then(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise ValueError("Circuits differ in width")
        return Circuit(width=self.width, gates=self.gates + other.gates)

    def on(self, width: int, mapping: Tuple[int, ...]) -> "Circuit":
        """
        The same gates placed on a wider register, qubit i going to mapping[i]
        """
        gates = [Gate(kind=g.kind, qubits=tuple(mapping[q] for q in g.qubits), theta=g.theta) for g in self.gates]
        return Circuit(width=width, gates=gates)


class CountsHistogram(BaseModel):
    """
    Shot counts per replicate over the outcomes of the measured qubits
    """
    bitstrings: List[str]
    counts: List[List[int]]
    shots_per_rep: int

    @model_validator(mode="after")
    def complete_reps(self) -> "CountsHistogram":
        for rep in self.counts:
            if len(rep) != len(self.bitstrings) or sum(rep) != self.shots_per_rep:
                raise ValueError("Every replicate must count shots_per_rep shots over all outcomes")
        return self

    @property
    def reps(self) -> int:
        return len(self.counts)

    def frequencies(self) -> np.ndarray:
        """
        reps x outcomes array of relative frequencies
        """
        return np.asarray(self.counts, dtype=float) / self.shots_per_rep

    def mean(self) -> np.ndarray:
        return self.frequencies().mean(axis=0)

    def std_error(self) -> np.ndarray:
        if self.reps < 2:
            return np.zeros(len(self.bitstrings))
        return self.frequencies().std(axis=0, ddof=1) / np.sqrt(self.reps)

    def rep_rows(self, rep: int) -> Dict[str, int]:
        return dict(zip(self.bitstrings, self.counts[rep]))
