import logging
from typing import Dict, Optional

import numpy as np

from config import settings
from core import densemath
from core.errors import DimensionError
from models.quantum import DensityMatrix, QubitHamiltonian
from models.records import BoundsReport, EntropyBudget, ProcessRecord
from services import infomeasures
from services.states import thermal_state

logger = logging.getLogger(__name__)

MSR_LABELS = ("S", "M", "R")


def _system(rho: DensityMatrix) -> DensityMatrix:
    return rho if rho.labels == ("S",) else rho.reduce(["S"])


def _energy(rho_s: DensityMatrix, h: QubitHamiltonian) -> float:
    return float(np.real(np.trace(h.matrix @ rho_s.matrix)))


def process_record(
    rho_sm: DensityMatrix,
    u_sr: np.ndarray,
    h_s_initial: QubitHamiltonian,
    h_r: QubitHamiltonian,
    beta: float,
    h_s_final: Optional[QubitHamiltonian] = None,
    retain_msr: bool = True
) -> ProcessRecord:
    """
    Quench H_S from ``h_s_initial`` to ``h_s_final``, then couple S to a fresh
    thermal qubit through ``u_sr`` (ordered S, R).

    Work on the system is the quench work plus the energy the coupling
    injects into S and R together.
    """
    h_s_final = h_s_initial if h_s_final is None else h_s_final
    rho_sm = rho_sm.reorder(["S", "M"])
    rho_r = thermal_state(h_r, beta)
    joint = rho_sm.tensor(rho_r)
    final = joint.evolve(densemath.require_unitary(u_sr, "U_SR"), ["S", "R"])

    rho_sm_final = final.reduce(["S", "M"])
    rho_r_final = final.reduce(["R"])
    rho_s_initial = rho_sm.reduce(["S"])
    rho_s_final = rho_sm_final.reduce(["S"])

    quench = _energy(rho_s_initial, h_s_final) - _energy(rho_s_initial, h_s_initial)
    coupling = (
        _energy(rho_s_final, h_s_final) - _energy(rho_s_initial, h_s_final)
        + _energy(rho_r_final, h_r) - _energy(rho_r, h_r)
    )
    return ProcessRecord(
        rho_sm_initial=rho_sm,
        rho_sm_final=rho_sm_final,
        rho_r_initial=rho_r,
        rho_r_final=rho_r_final,
        h_r=h_r,
        h_s_initial=h_s_initial,
        h_s_final=h_s_final,
        beta=beta,
        work_ext=quench + coupling,
        rho_msr_final=final if retain_msr else None
    )


def heat_to_reservoir(record: ProcessRecord) -> float:
    if record.rho_r_initial.dim != 2 or record.rho_r_final.dim != 2:
        raise DimensionError("Reservoir must be a single qubit", details={"dims": (record.rho_r_initial.dim, record.rho_r_final.dim)})
    return _energy(record.rho_r_final, record.h_r) - _energy(record.rho_r_initial, record.h_r)


def entropy_flux(record: ProcessRecord) -> float:
    """
    beta*Q_R; the same flux enters the conditional and the unconditional balance
    """
    return record.beta * heat_to_reservoir(record)


def _delta_s_s(record: ProcessRecord) -> float:
    return infomeasures.vn_entropy(_system(record.rho_sm_final)) - infomeasures.vn_entropy(_system(record.rho_sm_initial))


def _delta_s_s_given_m(record: ProcessRecord) -> float:
    return (
        infomeasures.conditional_entropy(record.rho_sm_final, "M")
        - infomeasures.conditional_entropy(record.rho_sm_initial, "M")
    )


def entropy_production_unconditional(record: ProcessRecord) -> float:
    return _delta_s_s(record) + entropy_flux(record)


def entropy_production_conditional(record: ProcessRecord) -> float:
    return _delta_s_s_given_m(record) + entropy_flux(record)


def dissipative_information(record: ProcessRecord) -> float:
    return entropy_production_conditional(record) - entropy_production_unconditional(record)


def free_energy(rho_s: DensityMatrix, h_s: QubitHamiltonian, temperature: float) -> float:
    rho_s = _system(rho_s)
    return _energy(rho_s, h_s) - temperature * infomeasures.vn_entropy(rho_s)


def conditional_free_energy(rho_sm: DensityMatrix, h_s: QubitHamiltonian, temperature: float) -> float:
    return _energy(_system(rho_sm), h_s) - temperature * infomeasures.conditional_entropy(rho_sm, "M")


def budget(record: ProcessRecord) -> EntropyBudget:
    temperature = record.temperature
    flux = entropy_flux(record)
    delta_s_s = _delta_s_s(record)
    delta_s_s_given_m = _delta_s_s_given_m(record)
    sigma_s = delta_s_s + flux
    sigma_s_given_m = delta_s_s_given_m + flux
    return EntropyBudget(
        sigma_s=sigma_s,
        sigma_s_given_m=sigma_s_given_m,
        sigma_i=sigma_s_given_m - sigma_s,
        delta_s_s=delta_s_s,
        delta_s_s_given_m=delta_s_s_given_m,
        heat_q_r=heat_to_reservoir(record),
        delta_f_s=free_energy(record.rho_sm_final, record.h_s_final, temperature)
        - free_energy(record.rho_sm_initial, record.h_s_initial, temperature),
        delta_f_s_given_m=conditional_free_energy(record.rho_sm_final, record.h_s_final, temperature)
        - conditional_free_energy(record.rho_sm_initial, record.h_s_initial, temperature)
    )


def bounds_check(record: ProcessRecord, tol: Optional[float] = None) -> BoundsReport:
    """
    Work bounds W >= dF_S and W >= dF_{S|M} + T*Sigma_I, heat bound
    beta*Q_S <= dS_{S|M} - Sigma_I. Margins are slack values, nonnegative when satisfied.
    """
    tol = settings.THEOREM_TOLERANCE if tol is None else tol
    b = budget(record)
    temperature = record.temperature
    heat_q_s = -b.heat_q_r
    margins = {
        "work_vs_f": record.work_ext - b.delta_f_s,
        "work_vs_fcond_plus_tsigma_i": record.work_ext - (b.delta_f_s_given_m + temperature * b.sigma_i),
        "heat_vs_scond_minus_sigma_i": (b.delta_s_s_given_m - b.sigma_i) - record.beta * heat_q_s,
    }
    return BoundsReport(
        work_vs_f=margins["work_vs_f"] >= -tol,
        work_vs_fcond_plus_tsigma_i=margins["work_vs_fcond_plus_tsigma_i"] >= -tol,
        heat_vs_scond_minus_sigma_i=margins["heat_vs_scond_minus_sigma_i"] >= -tol,
        margins=margins
    )


def energy_audit(record: ProcessRecord) -> float:
    """
    First-law residual dU_S - (W + Q_S) with Q_S = -Q_R
    """
    delta_u = _energy(_system(record.rho_sm_final), record.h_s_final) - _energy(_system(record.rho_sm_initial), record.h_s_initial)
    return delta_u - (record.work_ext - heat_to_reservoir(record))


def correlation_checks(record: ProcessRecord) -> Dict[str, Optional[float]]:
    """
    Correlation bookkeeping of one record.

    ``mutual_info_drop_defect`` is Sigma_I + dI_{S:M}. The memory-reservoir
    entries need the retained joint final state and are None otherwise.
    """
    b = budget(record)
    i_initial = infomeasures.mutual_information(record.rho_sm_initial)
    i_final = infomeasures.mutual_information(record.rho_sm_final)
    checks: Dict[str, Optional[float]] = {
        "sigma_i": b.sigma_i,
        "mutual_info_drop_defect": b.sigma_i + (i_final - i_initial),
        "sigma_s_given_m_minus_sigma_i": b.sigma_s_given_m - b.sigma_i,
        "cmi_defect": None,
        "i_sr_m_conservation_defect": None,
    }
    if record.rho_msr_final is not None:
        msr = record.rho_msr_final.reorder(list(MSR_LABELS))
        cmi = infomeasures.conditional_mutual_information(msr, "M", "R", "S")
        s_sr = infomeasures.vn_entropy(msr.reduce(["S", "R"]))
        s_m = infomeasures.vn_entropy(msr.reduce(["M"]))
        i_sr_m_final = s_sr + s_m - infomeasures.vn_entropy(msr)
        checks["cmi_defect"] = b.sigma_i - cmi
        checks["i_sr_m_conservation_defect"] = i_sr_m_final - i_initial
    return checks
