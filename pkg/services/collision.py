"""
Quench-and-collide work extraction with a stream of fresh thermal qubits.

Each step lowers the system level by dE, then an XY collision with a reservoir
qubit whose level is chosen so the system ends thermal at the quenched energy.
"""
import logging
import time
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from config import settings
from core import densemath
from core.errors import ParameterRegimeError, SimulatorError
from models.configs import CorrelationFamily, ProtocolConfig
from models.quantum import DensityMatrix, QubitHamiltonian
from models.records import NoiseSweep, StepResult, TimeSeries
from services import infomeasures, thermo
from services.states import correlated_state, thermal_state

logger = logging.getLogger(__name__)


def xy_unitary(g: float) -> np.ndarray:
    """
    exp(-i g (XY - YX)) on (S, R) in the basis 00, 01, 10, 11
    """
    c, s = np.cos(2 * g), np.sin(2 * g)
    return np.array([
        [1, 0, 0, 0],
        [0, c, s, 0],
        [0, -s, c, 0],
        [0, 0, 0, 1],
    ], dtype=complex)


def thermalization_channel(rho_s: DensityMatrix, g: float, p_reservoir: float) -> DensityMatrix:
    """
    Generalized amplitude damping left on S by one collision with a diagonal
    reservoir qubit of excited population ``p_reservoir``
    """
    c, s = np.cos(2 * g), np.sin(2 * g)
    m = np.array(rho_s.matrix)
    excited = c ** 2 * m[1, 1].real + s ** 2 * p_reservoir
    out = np.array([
        [1 - excited, c * m[0, 1]],
        [c * m[1, 0], excited],
    ], dtype=complex)
    return DensityMatrix(out, rho_s.subsystem_dims, rho_s.labels)


def reservoir_energy(e_s_current: float, delta_e: float, beta: float, g: float) -> float:
    """
    Reservoir level that brings S, thermal at ``e_s_current``, to the thermal
    state of the quenched level ``e_s_current - delta_e`` in one collision
    """
    if beta <= 0:
        raise ParameterRegimeError("Reservoir schedule needs beta > 0", details={"beta": beta})
    c2, s2 = np.cos(2 * g) ** 2, np.sin(2 * g) ** 2
    if s2 < 1e-15:
        raise ParameterRegimeError("Coupling angle does not exchange energy", details={"g": g})
    x = np.exp(beta * e_s_current)
    y = np.exp(beta * delta_e)
    numerator = x * (c2 * y - s2 * x - 1)
    denominator = c2 * x - s2 * y - x * y
    argument = numerator / denominator if denominator != 0 else np.inf
    if not np.isfinite(argument) or argument <= 0:
        raise ParameterRegimeError(
            "Reservoir level has no real solution in this regime",
            details={"e_s": e_s_current, "delta_e": delta_e, "beta": beta, "g": g, "log_argument": argument}
        )
    return float(np.log(argument) / beta)


def step(
    state_sm: DensityMatrix,
    e_s_current: float,
    config: ProtocolConfig,
    index: int = 0
) -> Tuple[DensityMatrix, StepResult]:
    """
    One quench of H_S by delta_e followed by one collision. The returned
    StepResult holds the budget of this step alone.
    """
    e_s_next = e_s_current - config.delta_e
    e_r = reservoir_energy(e_s_current, config.delta_e, config.beta, config.g)
    h_before = QubitHamiltonian(excited_energy=e_s_current)
    h_after = QubitHamiltonian(excited_energy=e_s_next)
    h_r = QubitHamiltonian(excited_energy=e_r)

    record = thermo.process_record(
        state_sm, xy_unitary(config.g), h_before, h_r, config.beta,
        h_s_final=h_after, retain_msr=config.retain_msr
    )
    excited = float(state_sm.reduce(["S"]).matrix[1, 1].real)
    work_quench = -config.delta_e * excited
    budget = thermo.budget(record)

    target = thermal_state(h_after, config.beta, label="S")
    distance = densemath.trace_distance(record.rho_sm_final.reduce(["S"]), target)
    cmi_defect = None
    if config.retain_msr:
        cmi_defect = thermo.correlation_checks(record)["cmi_defect"]

    logger.debug(f"Step {index}: E_S {e_s_current:.6f} -> {e_s_next:.6f}, E_R={e_r:.6f}, sigma_s={budget.sigma_s:.3e}")
    result = StepResult(
        step=index,
        e_s_before=e_s_current,
        e_s_after=e_s_next,
        e_r=e_r,
        work_quench=work_quench,
        work_coupling=record.work_ext - work_quench,
        heat_r=budget.heat_q_r,
        thermal_distance=distance,
        budget=budget,
        cmi_defect=cmi_defect
    )
    return record.rho_sm_final, result


def run_protocol(config: ProtocolConfig, progress: Optional[bool] = None) -> TimeSeries:
    """
    Full sweep from E^i to E^f. Entropy columns are cumulative from t_i.
    """
    start_time = time.time()
    progress = settings.SHOW_PROGRESS if progress is None else progress
    state = correlated_state(config.correlation, config.beta * config.e_initial)
    initial_mi = infomeasures.mutual_information(state)
    series = TimeSeries(
        initial_mutual_info=initial_mi,
        metadata={
            "steps": config.steps,
            "p": config.p,
            "parameter_reading": "beta*E^i = 1 and beta*E^f = 0.1 for the default schedule",
            "work_column": "quench work; collision energy in work_coupling",
        }
    )

    totals: Dict[str, float] = {key: 0.0 for key in (
        "work", "work_coupling", "heat_r", "sigma_s", "sigma_s_given_m", "sigma_i",
        "delta_s_s", "delta_s_s_given_m", "delta_f_s", "delta_f_s_given_m",
    )}
    e_s = config.e_initial
    logger.info(f"Running {config.steps} collision steps ({config.correlation.kind}, noise={config.correlation.noise})")
    for n in tqdm(range(config.steps), desc=f"collision[{config.correlation.kind}]", disable=not progress):
        try:
            state, result = step(state, e_s, config, index=n)
        except SimulatorError as e:
            e.details["step"] = n
            raise
        e_s = result.e_s_after
        b = result.budget
        totals["work"] += result.work_quench
        totals["work_coupling"] += result.work_coupling
        totals["heat_r"] += result.heat_r
        for key in ("sigma_s", "sigma_s_given_m", "sigma_i", "delta_s_s", "delta_s_s_given_m", "delta_f_s", "delta_f_s_given_m"):
            totals[key] += getattr(b, key)
        series.append({
            "step": n + 1,
            "e_s": e_s,
            "e_r": result.e_r,
            "mutual_info": infomeasures.mutual_information(state),
            "thermal_distance": result.thermal_distance,
            **totals,
        })

    logger.info(f"Protocol finished in {time.time() - start_time:.2f} seconds; final sigma_i={series.final('sigma_i'):.6f}")
    return series


def free_energy_change(config: ProtocolConfig) -> float:
    """
    T ln[(1 + e^{-beta E^i}) / (1 + e^{-beta E^f})], the quasistatic work
    """
    return float((np.logaddexp(0, -config.beta * config.e_initial) - np.logaddexp(0, -config.beta * config.e_final)) / config.beta)


def run_noise_sweep(config: ProtocolConfig, noise_values: Sequence[float]) -> NoiseSweep:
    """
    Dissipative information over time and noise strength for both correlated families
    """
    sweep = NoiseSweep(steps=list(range(1, config.steps + 1)))
    for noise in noise_values:
        sweep.noise.append(float(noise))
        for kind in ("classical", "quantum"):
            family = CorrelationFamily(kind=kind, noise=float(noise), p=config.correlation.p,
                                       beta_times_e=config.correlation.beta_times_e)
            series = run_protocol(config.with_correlation(family), progress=False)
            sweep.grid[kind].append(list(series.sigma_i))
        finals = {kind: sweep.grid[kind][-1][-1] for kind in sweep.grid}
        logger.info(f"Noise {noise}: classical={finals['classical']:.6f}, quantum={finals['quantum']:.6f}")
    return sweep


def convergence_scan(config: ProtocolConfig, factors: Sequence[int] = (1, 2, 4, 8)) -> List[Dict[str, float]]:
    """
    Work gaps to the free-energy change as delta_e is divided by each factor
    """
    target = free_energy_change(config)
    rows = []
    for factor in factors:
        scaled = config.with_delta_e(config.delta_e / factor)
        series = run_protocol(scaled, progress=False)
        rows.append({
            "delta_e": scaled.delta_e,
            "steps": scaled.steps,
            "work_quench": series.final("work"),
            "work_total": series.total_work,
            "delta_f_s": target,
            "gap_quench": abs(series.final("work") - target),
            "gap_total": abs(series.total_work - target),
        })
        logger.info(f"delta_e={scaled.delta_e:.3e}: quench gap {rows[-1]['gap_quench']:.3e}")
    return rows
