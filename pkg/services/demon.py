"""
Maxwell's-demon feedback on a thermal system qubit S with a memory qubit M.

Two-qubit operators here act on the register (M, S), memory first.
"""
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from tqdm import tqdm

from config import settings
from core import densemath
from core.densemath import PAULI_X, PAULI_Y, PAULI_Z
from core.errors import DimensionError
from models.quantum import DensityMatrix, QubitHamiltonian
from models.records import DemonRecord, NonlocalParams
from services import infomeasures
from services.states import pure_state, thermal_state

logger = logging.getLogger(__name__)

FEEDBACK_KINDS = ("unitary", "measurement")
MS_LABELS = ("M", "S")


def canonicalize(params: NonlocalParams, atol: float = 1e-9) -> NonlocalParams:
    """
    Fold an XX/YY/ZZ interaction vector into pi/4 >= c_x >= c_y >= |c_z|.

    Only the vector is folded; the local corrections this implies are absorbed
    by the random local unitaries drawn alongside it.
    """
    v = list(params.as_tuple())

    def shift(k: int) -> None:
        while v[k] <= -np.pi / 4:
            v[k] += np.pi / 2
        while v[k] > np.pi / 4:
            v[k] -= np.pi / 2

    for k in range(3):
        shift(k)
    v.sort(key=abs, reverse=True)
    if v[0] < 0:
        v[0], v[2] = -v[0], -v[2]
    if v[1] < 0:
        v[1], v[2] = -v[1], -v[2]
    shift(2)
    if v[0] > np.pi / 4 - atol and v[2] < 0:
        v[0], v[2] = np.pi / 2 - v[0], -v[2]
    return NonlocalParams(c_x=v[0], c_y=v[1], c_z=v[2])


def random_local_unitaries(rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    return tuple(densemath.haar_unitary(2, rng) for _ in range(4))


def random_nonlocal_params(rng: np.random.Generator) -> NonlocalParams:
    c = rng.uniform(0, np.pi / 4, size=3)
    return canonicalize(NonlocalParams(c_x=c[0], c_y=c[1], c_z=c[2]))


def canonical_two_qubit(params: NonlocalParams, locals_: Sequence[np.ndarray]) -> np.ndarray:
    """
    (u1 x u2) exp(i sum_k c_k sigma_k x sigma_k) (u3 x u4)
    """
    if len(locals_) != 4:
        raise DimensionError("Four single-qubit unitaries are required", details={"given": len(locals_)})
    u1, u2, u3, u4 = (densemath.require_unitary(u, "local unitary") for u in locals_)
    interaction = sum(c * np.kron(p, p) for c, p in zip(params.as_tuple(), (PAULI_X, PAULI_Y, PAULI_Z)))
    return np.kron(u1, u2) @ expm(1j * interaction) @ np.kron(u3, u4)


def _projector(k: int) -> np.ndarray:
    p = np.zeros((2, 2), dtype=complex)
    p[k, k] = 1
    return p


def unitary_feedback(u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """
    Lambda1 . Lambda0 on (M, S): u_k acts on S when M is in |k>
    """
    u0 = densemath.require_unitary(u0, "u0")
    u1 = densemath.require_unitary(u1, "u1")
    identity = np.eye(2, dtype=complex)
    lambda0 = np.kron(_projector(0), u0) + np.kron(_projector(1), identity)
    lambda1 = np.kron(_projector(0), identity) + np.kron(_projector(1), u1)
    return lambda1 @ lambda0


def measurement_feedback(
    state_ms: DensityMatrix,
    u0: np.ndarray,
    u1: np.ndarray
) -> Tuple[DensityMatrix, np.ndarray]:
    """
    Measure M in its eigenbasis and apply u_k to S on outcome k.

    Returns the recombined post-measurement ensemble and the outcome probabilities.
    """
    state_ms = state_ms.reorder(list(MS_LABELS))
    unitaries = (densemath.require_unitary(u0, "u0"), densemath.require_unitary(u1, "u1"))
    memory = state_ms.reduce(["M"]).eigensystem()
    recombined = np.zeros((4, 4), dtype=complex)
    probabilities = np.zeros(2)
    for k in range(2):
        kraus = np.kron(memory.projector(k), unitaries[k])
        branch = kraus @ state_ms.matrix @ kraus.conj().T
        probabilities[k] = float(np.trace(branch).real)
        recombined += branch
    return DensityMatrix(recombined, state_ms.subsystem_dims, state_ms.labels), probabilities


def deferred_feedback(state_ms: DensityMatrix, u0: np.ndarray, u1: np.ndarray) -> DensityMatrix:
    """
    Coherent control of u_k by the memory eigenbasis followed by dephasing M in
    that basis; equals measure-then-apply when the measurement is postponed
    """
    state_ms = state_ms.reorder(list(MS_LABELS))
    memory = state_ms.reduce(["M"]).eigensystem().eigenvectors
    rotate = np.kron(memory, np.eye(2, dtype=complex))
    control = rotate @ unitary_feedback(u0, u1) @ rotate.conj().T
    return state_ms.evolve(control, list(MS_LABELS)).dephased_subsystem("M", memory)


def _initial_state(beta: float, system_energy: float) -> DensityMatrix:
    memory = pure_state([1, 0], (2,), ("M",))
    system = thermal_state(QubitHamiltonian(excited_energy=system_energy), beta, label="S")
    return memory.tensor(system)


def demon_sample(
    sample_id: int,
    beta: float,
    feedback_kind: str,
    rng: np.random.Generator,
    system_energy: float = 1.0,
    gate: Optional[Tuple[NonlocalParams, Tuple[np.ndarray, ...]]] = None
) -> DemonRecord:
    """
    One random demon operation on a pure memory and a thermal system.

    The unitary kind applies the random gate as the whole M-S operation. The
    measurement kind applies it, then measures M and feeds back random u_k;
    its record also carries the entropy the measurement adds and the distance
    to the deferred-measurement form of the same feedback.
    """
    params, locals_ = gate if gate is not None else (random_nonlocal_params(rng), random_local_unitaries(rng))
    initial = _initial_state(beta, system_energy)
    s_initial = infomeasures.vn_entropy(initial.reduce(["S"]))
    state = initial.evolve(canonical_two_qubit(params, locals_), list(MS_LABELS))

    measurement_entropy = deferral_defect = 0.0
    if feedback_kind == "measurement":
        u0, u1 = densemath.haar_unitary(2, rng), densemath.haar_unitary(2, rng)
        measured = infomeasures.vn_entropy(infomeasures.memory_dephased(state, "M"))
        measurement_entropy = measured - s_initial
        deferred = deferred_feedback(state, u0, u1)
        state, _ = measurement_feedback(state, u0, u1)
        deferral_defect = densemath.trace_distance(state.matrix, deferred.matrix)
    elif feedback_kind != "unitary":
        raise DimensionError(f"Unknown feedback kind {feedback_kind}")

    s_final = infomeasures.vn_entropy(state.reduce(["S"]))
    s_m = infomeasures.vn_entropy(state.reduce(["M"]))
    mutual = infomeasures.mutual_information(state)
    dephased_mutual = infomeasures.dephased_mutual_information(state, "M")
    delta_s_s = s_final - s_initial

    if feedback_kind == "unitary":
        defect = delta_s_s - (mutual - s_m)
    else:
        defect = delta_s_s - (dephased_mutual - s_m + measurement_entropy)

    return DemonRecord(
        sample_id=sample_id,
        c_x=params.c_x,
        c_y=params.c_y,
        c_z=params.c_z,
        delta_s_s=delta_s_s,
        mutual_info_final=mutual,
        memory_entropy_final=s_m,
        dephased_mutual_info_final=dephased_mutual,
        feedback_kind=feedback_kind,
        beta=beta,
        system_entropy_initial=s_initial,
        system_entropy_final=s_final,
        identity_defect=defect,
        measurement_entropy=measurement_entropy,
        deferral_defect=deferral_defect
    )


def demon_scatter(
    beta: float,
    num_samples: int,
    seed: int,
    feedback_kind: str,
    system_energy: float = 1.0,
    progress: Optional[bool] = None
) -> List[DemonRecord]:
    """
    Scatter of entropy change against final correlations for random demon gates.

    Nonlocal parameters are uniform on [0, pi/4]^3 then folded into the Weyl
    chamber; local unitaries are Haar. The stream depends only on
    (seed, feedback_kind, beta).
    """
    start_time = time.time()
    progress = settings.SHOW_PROGRESS if progress is None else progress
    rng = np.random.default_rng([seed, FEEDBACK_KINDS.index(feedback_kind), int(round(beta * 1e6))])
    records = [
        demon_sample(i, beta, feedback_kind, rng, system_energy)
        for i in tqdm(range(num_samples), desc=f"demon[{feedback_kind}, beta={beta}]", disable=not progress)
    ]
    worst = max(max(abs(r.identity_defect), r.deferral_defect) for r in records)
    logger.info(f"Demon scatter ({feedback_kind}, beta={beta}): {num_samples} samples in {time.time() - start_time:.2f}s, worst identity defect {worst:.2e}")
    return records
