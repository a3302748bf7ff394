import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import expit

from config import settings


class CorrelationFamily(BaseModel):
    """
    Initial system-memory correlation: kind, thermal weight and noise.

    The weight is either given directly as ``p`` or through the dimensionless
    product ``beta_times_e`` with p = 1/(1+exp(-beta*E)).
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["classical", "quantum", "product"] = "classical"
    p: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    beta_times_e: Optional[float] = None
    noise: float = Field(default=0.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def single_weight_source(self) -> "CorrelationFamily":
        if self.p is not None and self.beta_times_e is not None:
            raise ValueError("Give either p or beta_times_e, not both")
        return self

    def resolve_p(self, default_beta_times_e: Optional[float] = None) -> float:
        if self.p is not None:
            return self.p
        x = self.beta_times_e if self.beta_times_e is not None else default_beta_times_e
        if x is None:
            raise ValueError("Correlation weight is undetermined")
        return float(expit(x))


class ProtocolConfig(BaseModel):
    """
    Collisional protocol parameters; defaults are the reference protocol
    beta=1, E^i=1, E^f=0.1, dE=0.0045, g=0.1.
    """
    model_config = ConfigDict(frozen=True)

    beta: float = Field(default=1.0, gt=0.0)
    e_initial: float = 1.0
    e_final: float = Field(default=0.1, ge=0.0)
    delta_e: float = Field(default=0.0045, gt=0.0)
    g: float = Field(default=0.1, gt=0.0, le=math.pi / 2)
    correlation: CorrelationFamily = CorrelationFamily()
    retain_msr: bool = False

    @model_validator(mode="after")
    def consistent_schedule(self) -> "ProtocolConfig":
        if self.e_initial <= self.e_final:
            raise ValueError("e_initial must exceed e_final")
        span = self.e_initial - self.e_final
        steps = round(span / self.delta_e)
        if steps < 1 or abs(steps * self.delta_e - span) > 1e-9:
            raise ValueError(
                f"delta_e={self.delta_e} does not divide e_initial - e_final={span} into whole steps"
            )
        return self

    @property
    def steps(self) -> int:
        return int(round((self.e_initial - self.e_final) / self.delta_e))

    @property
    def p(self) -> float:
        return self.correlation.resolve_p(self.beta * self.e_initial)

    def with_delta_e(self, delta_e: float) -> "ProtocolConfig":
        return self.model_copy(update={"delta_e": delta_e})

    def with_correlation(self, correlation: CorrelationFamily) -> "ProtocolConfig":
        return self.model_copy(update={"correlation": correlation})


class ShotConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    shots_per_rep: int = Field(default=8192, ge=1)
    reps: int = Field(default=5, ge=1)
    seed: int = settings.DEFAULT_SEED
    readout_flip_prob: Optional[float] = Field(default=None, ge=0.0, le=0.5)
    # P(read 0 | 1); falls back to readout_flip_prob
    readout_decay_prob: Optional[float] = Field(default=None, ge=0.0, le=0.5)

    def readout_channel(self) -> Optional[Tuple[float, float]]:
        """
        (P(read 1 | 0), P(read 0 | 1)), or None without readout error
        """
        flip = self.readout_flip_prob or 0.0
        decay = flip if self.readout_decay_prob is None else self.readout_decay_prob
        if flip == 0.0 and decay == 0.0:
            return None
        return flip, decay


class DemonConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    betas: List[float] = [0.0, 2.0]
    system_energy: float = 1.0
    num_samples: int = Field(default=10000, ge=1)
    seed: int = settings.DEFAULT_SEED
    feedback_kinds: List[Literal["unitary", "measurement"]] = ["unitary", "measurement"]


class EmulationConfig(BaseModel):
    """
    Circuit experiment parameters. The defaults are the hardware configuration:
    eps_c=0.5, beta_S*E_S=1, beta_R*E_R=0.1, g=1.
    """
    model_config = ConfigDict(frozen=True)

    eps_c: float = Field(default=0.5, ge=0.0, le=1.0)
    beta_times_e_system: float = 1.0
    beta_times_e_reservoir: float = 0.1
    g: float = 1.0
    shots: ShotConfig = ShotConfig()
    exact: bool = False
    printed_thermal_angle: bool = False
    shot_sweep: List[int] = [1024, 2048, 4096, 8192, 16384, 32768, 65536]


class TrajectoryConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    correlation: CorrelationFamily = CorrelationFamily(kind="classical", noise=0.5)
    beta_times_e_system: float = 1.0
    beta_times_e_reservoir: float = 0.1
    g: float = 1.0
    scheme: Literal["global", "local", "both"] = "both"


class VerifyConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    instances: int = Field(default=1000, ge=1)
    ift_instances: int = Field(default=100, ge=1)
    seed: int = settings.DEFAULT_SEED
    scheme: Literal["global", "local", "both"] = "both"
    inject_sign_flip: bool = False


class RunConfig(BaseModel):
    """
    Top-level configuration file; each subcommand reads its own section
    """
    model_config = ConfigDict(frozen=True)

    collision: ProtocolConfig = ProtocolConfig()
    trajectories: TrajectoryConfig = TrajectoryConfig()
    demon: DemonConfig = DemonConfig()
    emulate: EmulationConfig = EmulationConfig()
    verify: VerifyConfig = VerifyConfig()
    output_dir: Path = settings.OUTPUT_DIR
    seed: Optional[int] = None
    format: Literal["csv", "json"] = "csv"
