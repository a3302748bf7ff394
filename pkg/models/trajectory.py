from dataclasses import dataclass, field
from typing import Dict, List, Literal, NamedTuple, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel

from core.densemath import EigenSystem

Direction = Literal["forward", "backward"]
Scheme = Literal["global", "local"]
FunctionalKind = Literal[
    "sigma_s_given_m_global",
    "sigma_s",
    "sigma_s_global",
    "sigma_i_global",
    "sigma_s_given_m_local",
    "sigma_i_local",
]


class GlobalOutcome(NamedTuple):
    """
    Joint SM eigenindex and reservoir level before (n, r) and after (n', r')
    """
    n: int
    r: int
    n_prime: int
    r_prime: int

    def label(self) -> str:
        return f"n{self.n}r{self.r}-n{self.n_prime}r{self.r_prime}"


class LocalOutcome(NamedTuple):
    """
    Local S, M, R indices before and S, R indices after; M is read once
    """
    a: int
    b: int
    r: int
    a_prime: int
    r_prime: int

    def label(self) -> str:
        return f"a{self.a}b{self.b}r{self.r}-a{self.a_prime}r{self.r_prime}"

    @property
    def sr(self) -> Tuple[int, int, int, int]:
        return (self.a, self.r, self.a_prime, self.r_prime)


Outcome = Union[GlobalOutcome, LocalOutcome]


@dataclass(frozen=True, eq=False)
class MeasurementBases:
    """
    Eigenbases shared by a forward/backward pair. Reservoir outcomes are
    energy levels, so the reservoir basis is always computational.
    """
    sm_initial: EigenSystem
    sm_final: EigenSystem
    s_initial: EigenSystem
    s_final: EigenSystem
    m: EigenSystem
    reservoir_populations: np.ndarray


@dataclass(frozen=True, eq=False)
class TrajectoryDistribution:
    direction: Direction
    scheme: Scheme
    probabilities: Dict[Outcome, float]
    bases: MeasurementBases
    populations: Dict[str, np.ndarray] = field(default_factory=dict)
    transitions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def total(self) -> float:
        return float(sum(self.probabilities.values()))

    def to_json_dict(self) -> Dict[str, float]:
        return {outcome.label(): probability for outcome, probability in sorted(self.probabilities.items())}


@dataclass(frozen=True, eq=False)
class StochasticFunctional:
    """
    Per-outcome values of one stochastic entropy functional, in nats.

    ``backward`` holds the matched reversed-process weight of each outcome,
    so that forward/backward equals exp(value) outcome by outcome.
    """
    kind: FunctionalKind
    scheme: Scheme
    values: Dict[Outcome, float]
    backward: Dict[Outcome, float] = field(default_factory=dict)
    excluded: Tuple[Outcome, ...] = ()


class FTBin(BaseModel):
    sigma: float
    p_forward: float
    p_backward: float
    log_ratio: Optional[float] = None


class DetailedFTReport(BaseModel):
    """
    Forward histogram of one functional against the matched backward histogram
    at -sigma; bins missing either side are listed in ``empty_bins``
    """
    kind: str
    condition: Optional[str] = None
    bins: List[FTBin] = []
    empty_bins: List[float] = []

    @property
    def max_deviation(self) -> float:
        deviations = [abs(b.log_ratio - b.sigma) for b in self.bins if b.log_ratio is not None]
        return max(deviations) if deviations else 0.0


class AveragesReport(BaseModel):
    mean_sigma_s_given_m_global: float
    mean_sigma_s_global: float
    mean_sigma_s: float
    mean_sigma_s_given_m_local: float
    mean_sigma_i_local: float
    delta_j: float
    sigma_s_given_m: float
    sigma_s: float
    sigma_i: float
    dephased_change_plus_heat: float
    local_coherence: float
    defects: Dict[str, float]
    local_identities_apply: bool
    passed: bool
