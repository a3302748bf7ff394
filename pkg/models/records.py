from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import settings
from core.errors import InvalidStateError
from models.quantum import DensityMatrix, QubitHamiltonian


@dataclass(frozen=True, eq=False)
class ProcessRecord:
    """
    One system-memory process driven by a single thermal reservoir qubit.

    ``rho_msr_final`` is optional; when present it is the joint final state of
    S, M and R and enables the conditional-mutual-information cross-check.
    """
    rho_sm_initial: DensityMatrix
    rho_sm_final: DensityMatrix
    rho_r_initial: DensityMatrix
    rho_r_final: DensityMatrix
    h_r: QubitHamiltonian
    h_s_initial: QubitHamiltonian
    h_s_final: QubitHamiltonian
    beta: float
    work_ext: float = 0.0
    rho_msr_final: Optional[DensityMatrix] = None

    def __post_init__(self):
        for name in ("rho_sm_initial", "rho_sm_final"):
            state = getattr(self, name)
            if set(state.labels) != {"S", "M"}:
                raise InvalidStateError(f"{name} must carry subsystems S and M", details={"labels": state.labels})
        if self.rho_msr_final is not None and set(self.rho_msr_final.labels) != {"S", "M", "R"}:
            raise InvalidStateError("rho_msr_final must carry S, M and R", details={"labels": self.rho_msr_final.labels})

        expected = np.diag(self.h_r.thermal_populations(self.beta))
        deviation = float(np.max(np.abs(self.rho_r_initial.matrix - expected)))
        if deviation > settings.STATE_TOLERANCE:
            raise InvalidStateError(
                "Reservoir must start in its thermal state",
                details={"deviation": deviation, "beta": self.beta, "e_r": self.h_r.excited_energy}
            )

    @property
    def temperature(self) -> float:
        return 1.0 / self.beta


class EntropyBudget(BaseModel):
    """
    Ensemble entropy and free-energy balance of a process, in nats and energy units
    """
    model_config = ConfigDict(frozen=True)

    sigma_s: float
    sigma_s_given_m: float
    sigma_i: float
    delta_s_s: float
    delta_s_s_given_m: float
    heat_q_r: float
    delta_f_s: float
    delta_f_s_given_m: float


class BoundsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    work_vs_f: bool
    work_vs_fcond_plus_tsigma_i: bool
    heat_vs_scond_minus_sigma_i: bool
    margins: Dict[str, float]

    @property
    def passed(self) -> bool:
        return self.work_vs_f and self.work_vs_fcond_plus_tsigma_i and self.heat_vs_scond_minus_sigma_i


class StepResult(BaseModel):
    """
    Bookkeeping of one quench-collide step; the budget covers this step only
    """
    step: int
    e_s_before: float
    e_s_after: float
    e_r: float
    work_quench: float
    work_coupling: float
    heat_r: float
    thermal_distance: float
    budget: EntropyBudget
    cmi_defect: Optional[float] = None


TIME_SERIES_COLUMNS: Tuple[str, ...] = (
    "step", "e_s", "e_r", "work", "work_coupling", "heat_r",
    "sigma_s", "sigma_s_given_m", "sigma_i",
    "delta_s_s", "delta_s_s_given_m", "delta_f_s", "delta_f_s_given_m",
    "mutual_info", "thermal_distance",
)


class TimeSeries(BaseModel):
    """
    Per-step protocol curves. ``work`` is the cumulative quench work,
    ``work_coupling`` the cumulative energy injected by the collisions.
    """
    step: List[int] = []
    e_s: List[float] = []
    e_r: List[float] = []
    work: List[float] = []
    work_coupling: List[float] = []
    heat_r: List[float] = []
    sigma_s: List[float] = []
    sigma_s_given_m: List[float] = []
    sigma_i: List[float] = []
    delta_s_s: List[float] = []
    delta_s_s_given_m: List[float] = []
    delta_f_s: List[float] = []
    delta_f_s_given_m: List[float] = []
    mutual_info: List[float] = []
    thermal_distance: List[float] = []
    initial_mutual_info: float = 0.0
    metadata: Dict[str, Any] = {}

    def append(self, row: Dict[str, float]) -> None:
        for column in TIME_SERIES_COLUMNS:
            getattr(self, column).append(row[column])

    def rows(self) -> Iterator[Tuple[Any, ...]]:
        return zip(*(getattr(self, column) for column in TIME_SERIES_COLUMNS))

    def __len__(self) -> int:
        return len(self.step)

    def final(self, column: str) -> float:
        return getattr(self, column)[-1]

    @property
    def total_work(self) -> float:
        return self.final("work") + self.final("work_coupling")


class NonlocalParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    c_x: float
    c_y: float
    c_z: float

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.c_x, self.c_y, self.c_z)

    def is_canonical(self, atol: float = 1e-12) -> bool:
        return np.pi / 4 + atol >= self.c_x >= self.c_y - atol and self.c_y + atol >= abs(self.c_z)


class DemonRecord(BaseModel):
    sample_id: int
    c_x: float
    c_y: float
    c_z: float
    delta_s_s: float
    mutual_info_final: float
    memory_entropy_final: float
    dephased_mutual_info_final: float
    feedback_kind: Literal["unitary", "measurement"]
    beta: float
    system_entropy_initial: float
    system_entropy_final: float
    identity_defect: float
    measurement_entropy: float = 0.0
    deferral_defect: float = 0.0


class CheckResult(BaseModel):
    name: str
    worst_defect: float
    tolerance: float
    instances: int
    passed: bool
    details: Dict[str, Any] = Field(default_factory=dict)


class NoiseSweep(BaseModel):
    """
    Cumulative Sigma_I after every collision step, one row per noise value,
    for the classical and quantum families
    """
    noise: List[float] = []
    steps: List[int] = []
    grid: Dict[str, List[List[float]]] = Field(default_factory=lambda: {"classical": [], "quantum": []})

    def final(self, kind: str) -> List[float]:
        return [row[-1] for row in self.grid[kind]]

    def rows(self) -> List[Dict[str, float]]:
        finals = {kind: self.final(kind) for kind in self.grid}
        return [{"noise": noise, **{kind: values[i] for kind, values in finals.items()}}
                for i, noise in enumerate(self.noise)]

    def grid_rows(self) -> List[Dict[str, Any]]:
        return [
            {"kind": kind, "noise": noise, "step": step, "sigma_i": value}
            for kind, grid in self.grid.items()
            for noise, row in zip(self.noise, grid)
            for step, value in zip(self.steps, row)
        ]
