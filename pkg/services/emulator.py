"""
Gate-level emulation of the two-point-measurement experiment.

Registers: the preparation circuit acts on (M, S), the thermal circuit on
(R, V) with V purifying R, the collision on (S, R). The full forward circuit
runs on (M, S, R, V). Outcome distributions are computed exactly from the
statevector and then sampled shot by shot with numpy's multinomial.
"""
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq
from scipy.stats import entropy

from config import settings
from core import densemath
from core.errors import NonUnitaryError, SolverConvergenceError
from models.circuit import Circuit, CountsHistogram, Gate
from models.configs import EmulationConfig, ShotConfig
from services.collision import xy_unitary
from services.states import classical_corr_state

logger = logging.getLogger(__name__)

FULL_WIDTH = 4
QUBIT_M, QUBIT_S, QUBIT_R, QUBIT_V = range(FULL_WIDTH)
FUNCTIONALS = ("sigma_s_given_m", "sigma_s", "sigma_i")


def _ry(qubit: int, theta: float) -> Gate:
    return Gate(kind="ry", qubits=(qubit,), theta=float(theta))


def simulate_statevector(circuit: Circuit, initial: Optional[np.ndarray] = None) -> np.ndarray:
    if initial is None:
        initial = np.zeros(2 ** circuit.width, dtype=complex)
        initial[0] = 1
    return circuit.unitary() @ np.asarray(initial, dtype=complex)


def marginal_probabilities(state: np.ndarray, width: int, measured: Sequence[int]) -> np.ndarray:
    """
    Outcome probabilities of the measured qubits, first listed qubit most significant
    """
    probabilities = (np.abs(state) ** 2).reshape([2] * width)
    traced = tuple(q for q in range(width) if q not in measured)
    marginal = probabilities.sum(axis=traced) if traced else probabilities
    order = sorted(measured)
    marginal = np.transpose(marginal, [order.index(q) for q in measured])
    return marginal.reshape(-1)


def solve_prep_angles(p: float, eps_c: float) -> Tuple[float, float]:
    """
    Angles of Ry(t1) on M, CNOT M->S, Ry(t2) on both, whose computational
    diagonal equals that of the classically correlated state.

    The determining equations are cos(t1) cos(t2) = 2p - 1 and
    sin^2(t2) (1 - sin t1) = 4 eps_c p (1 - p).
    """
    classical_corr_state(p, eps_c)
    target = 2 * p - 1
    mixing = 4 * eps_c * p * (1 - p)
    pivot = float(np.arccos(target))

    if eps_c == 0:
        theta1, theta2 = pivot, 0.0
    elif eps_c == 1:
        theta1 = 0.0 if p >= 0.5 else np.pi
        theta2 = float(np.arccos(np.clip(target / np.cos(theta1), -1.0, 1.0)))
    else:
        def residual(t1: float) -> float:
            cos_t2 = np.clip(target / np.cos(t1), -1.0, 1.0)
            return (1 - cos_t2 ** 2) * (1 - np.sin(t1)) - mixing

        bracket = (0.0, pivot) if p >= 0.5 else (pivot, np.pi)
        try:
            theta1 = float(brentq(residual, *bracket, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        except ValueError as e:
            raise SolverConvergenceError(
                "No preparation angle in the bracket",
                details={"p": p, "eps_c": eps_c, "bracket": bracket, "reason": str(e)}
            )
        theta2 = float(np.arccos(np.clip(target / np.cos(theta1), -1.0, 1.0)))

    residuals = (
        0.5 * (1 + np.cos(theta1) * np.cos(theta2)) - p,
        0.25 * np.sin(theta2) ** 2 * (1 - np.sin(theta1)) - eps_c * p * (1 - p),
    )
    if max(abs(r) for r in residuals) > 1e-10:
        raise SolverConvergenceError(
            "Preparation angles miss the target populations",
            details={"p": p, "eps_c": eps_c, "residuals": residuals}
        )
    return theta1, theta2


def prep_circuit(p: float, eps_c: float) -> Circuit:
    """
    Two-qubit circuit on (M, S) whose output diagonal matches the classical family
    """
    theta1, theta2 = solve_prep_angles(p, eps_c)
    return Circuit(width=2, gates=[
        _ry(0, theta1),
        Gate(kind="cnot", qubits=(0, 1)),
        _ry(0, theta2),
        _ry(1, theta2),
    ])


def thermal_prep_angle(beta_times_e: float, printed: bool = False) -> float:
    """
    Ry angle whose output, after a CNOT onto a purifying qubit, leaves the
    thermal state; tan^2(theta/2) = exp(-beta E).

    ``printed`` returns 2 arctan(exp(beta E)) instead, kept for comparison
    only since it does not give thermal populations.
    """
    if printed:
        logger.warning("Using the printed thermal-prep angle 2*arctan(exp(beta*E)); reduced state will not be thermal")
        return float(2 * np.arctan(np.exp(beta_times_e)))
    return float(2 * np.arctan(np.exp(-beta_times_e / 2)))


def thermal_circuit(beta_times_e: float, printed: bool = False) -> Circuit:
    return Circuit(width=2, gates=[
        _ry(0, thermal_prep_angle(beta_times_e, printed)),
        Gate(kind="cnot", qubits=(0, 1)),
    ])


def decompose_xy(g: float) -> Circuit:
    """
    exp(-i g (XY - YX)) on (S, R) with two CNOTs
    """
    return Circuit(width=2, gates=[
        Gate(kind="s", qubits=(0,)),
        Gate(kind="s", qubits=(1,)),
        Gate(kind="h", qubits=(0,)),
        Gate(kind="cnot", qubits=(0, 1)),
        _ry(0, 2 * g),
        _ry(1, 2 * g),
        Gate(kind="cnot", qubits=(0, 1)),
        Gate(kind="h", qubits=(0,)),
        Gate(kind="sdg", qubits=(0,)),
        Gate(kind="sdg", qubits=(1,)),
    ])


def basis_input_circuit(bits: Sequence[int], body: Circuit) -> Circuit:
    """
    Prepare the computational state ``bits`` with Ry(pi) flips, then run ``body``
    """
    flips = [_ry(q, np.pi) for q, bit in enumerate(bits) if bit]
    return Circuit(width=body.width, gates=flips + body.gates)


def full_forward_circuit(p: float, eps_c: float, beta_times_e_reservoir: float, g: float, printed: bool = False) -> Circuit:
    return (
        prep_circuit(p, eps_c).on(FULL_WIDTH, (QUBIT_M, QUBIT_S))
        .then(thermal_circuit(beta_times_e_reservoir, printed).on(FULL_WIDTH, (QUBIT_R, QUBIT_V)))
        .then(decompose_xy(g).on(FULL_WIDTH, (QUBIT_S, QUBIT_R)))
    )


def transition_matrix(u: np.ndarray) -> np.ndarray:
    """
    T[j, k] = |<k|U|j>|^2, row j the input
    """
    u = np.asarray(u, dtype=complex)
    if not densemath.is_unitary(u):
        raise NonUnitaryError("Transition matrix needs a unitary")
    return (np.abs(u) ** 2).T


def _bitstrings(width: int) -> List[str]:
    return ["".join(bits) for bits in itertools.product("01", repeat=width)]


def apply_readout_error(probabilities: np.ndarray, flip_prob: float, decay_prob: Optional[float] = None) -> np.ndarray:
    """
    Independent classical readout channel on every measured qubit: a 0 reads as
    1 with ``flip_prob``, a 1 reads as 0 with ``decay_prob`` (default ``flip_prob``)
    """
    decay_prob = flip_prob if decay_prob is None else decay_prob
    channel = np.array([[1 - flip_prob, decay_prob], [flip_prob, 1 - decay_prob]])
    width = int(np.log2(len(probabilities)))
    p = np.asarray(probabilities, dtype=float).reshape([2] * width)
    for axis in range(width):
        p = np.moveaxis(np.tensordot(channel, p, axes=([1], [axis])), 0, axis)
    return p.reshape(-1)


def sample_counts(
    probabilities: np.ndarray,
    shot_config: ShotConfig,
    stream: int = 0
) -> CountsHistogram:
    """
    Seeded multinomial draws, one generator per replicate spawned from
    (seed, stream); readout flips are folded into the distribution first.
    """
    p = np.clip(np.asarray(probabilities, dtype=float), 0.0, None)
    p = p / p.sum()
    channel = shot_config.readout_channel()
    if channel is not None:
        p = apply_readout_error(p, *channel)
    width = int(np.log2(len(p)))
    children = np.random.SeedSequence([shot_config.seed, stream]).spawn(shot_config.reps)
    counts = [np.random.default_rng(child).multinomial(shot_config.shots_per_rep, p).tolist() for child in children]
    return CountsHistogram(bitstrings=_bitstrings(width), counts=counts, shots_per_rep=shot_config.shots_per_rep)


def sample_circuit(circuit: Circuit, measured: Sequence[int], shot_config: ShotConfig, stream: int = 0) -> CountsHistogram:
    probabilities = marginal_probabilities(simulate_statevector(circuit), circuit.width, measured)
    return sample_counts(probabilities, shot_config, stream)


@dataclass(frozen=True)
class ExperimentData:
    """
    Per-replicate estimates from the separate circuit families.

    p_ab arrays are indexed [a (S), b (M)]; transition arrays [rep, (a, r), (a', r')].
    """
    p_ab_initial: np.ndarray
    p_r_forward: np.ndarray
    p_r_backward: np.ndarray
    t_forward: np.ndarray
    t_backward: np.ndarray
    p_ab_final: np.ndarray

    @property
    def reps(self) -> int:
        return self.p_ab_initial.shape[0]

    def pooled(self) -> "ExperimentData":
        return ExperimentData(*(getattr(self, name).mean(axis=0, keepdims=True) for name in (
            "p_ab_initial", "p_r_forward", "p_r_backward", "t_forward", "t_backward", "p_ab_final")))


def _ms_to_ab(ms: np.ndarray) -> np.ndarray:
    """
    (M, S)-ordered outcome vectors to [.., a, b] arrays
    """
    return np.swapaxes(np.asarray(ms).reshape(ms.shape[:-1] + (2, 2)), -1, -2)


def _circuit_family(config: EmulationConfig, p: float) -> Dict[str, Tuple[Circuit, Tuple[int, ...]]]:
    return {
        "initial": (prep_circuit(p, config.eps_c), (0, 1)),
        "reservoir": (thermal_circuit(config.beta_times_e_reservoir, config.printed_thermal_angle), (0,)),
        "final": (full_forward_circuit(p, config.eps_c, config.beta_times_e_reservoir, config.g,
                                       config.printed_thermal_angle), (QUBIT_M, QUBIT_S)),
    }


def run_experiment(config: EmulationConfig) -> ExperimentData:
    """
    Exact outcome distributions of every circuit, or shot estimates of them
    with ``config.shots``. The exact mode is the infinite-shot limit, so a
    configured readout channel still applies.
    """
    p = float(1 / (1 + np.exp(-config.beta_times_e_system)))
    family = _circuit_family(config, p)
    exact = {name: marginal_probabilities(simulate_statevector(c), c.width, measured) for name, (c, measured) in family.items()}
    forward_rows = [marginal_probabilities(simulate_statevector(basis_input_circuit(bits, decompose_xy(config.g))), 2, (0, 1))
                    for bits in itertools.product((0, 1), repeat=2)]
    backward_rows = [marginal_probabilities(simulate_statevector(basis_input_circuit(bits, decompose_xy(-config.g))), 2, (0, 1))
                     for bits in itertools.product((0, 1), repeat=2)]

    if config.exact:
        channel = config.shots.readout_channel()
        if channel is not None:
            exact = {name: apply_readout_error(p, *channel) for name, p in exact.items()}
            forward_rows = [apply_readout_error(row, *channel) for row in forward_rows]
            backward_rows = [apply_readout_error(row, *channel) for row in backward_rows]
        return ExperimentData(
            p_ab_initial=_ms_to_ab(exact["initial"][None, :]),
            p_r_forward=exact["reservoir"][None, :],
            p_r_backward=exact["reservoir"][None, :],
            t_forward=np.array(forward_rows)[None, :, :],
            t_backward=np.array(backward_rows)[None, :, :],
            p_ab_final=_ms_to_ab(exact["final"][None, :])
        )

    shots = config.shots
    stream = iter(itertools.count())
    initial = sample_counts(exact["initial"], shots, next(stream)).frequencies()
    reservoir_forward = sample_counts(exact["reservoir"], shots, next(stream)).frequencies()
    reservoir_backward = sample_counts(exact["reservoir"], shots, next(stream)).frequencies()
    t_forward = np.stack([sample_counts(row, shots, next(stream)).frequencies() for row in forward_rows], axis=1)
    t_backward = np.stack([sample_counts(row, shots, next(stream)).frequencies() for row in backward_rows], axis=1)
    final = sample_counts(exact["final"], shots, next(stream)).frequencies()
    return ExperimentData(
        p_ab_initial=_ms_to_ab(initial),
        p_r_forward=reservoir_forward,
        p_r_backward=reservoir_backward,
        t_forward=t_forward,
        t_backward=t_backward,
        p_ab_final=_ms_to_ab(final)
    )


class FTPoint(BaseModel):
    sigma: float
    logratio: float
    stderr: float


class FunctionalEstimate(BaseModel):
    functional: str
    estimate: float
    std_error: float
    per_rep: List[float]
    mean_value: float
    mean_std_error: float
    conditioned: Dict[str, Tuple[float, float]] = {}
    bins: List[FTPoint] = []
    slope: Optional[float] = None
    intercept: Optional[float] = None
    diagonal_deviation: Optional[float] = None


class FTReport(BaseModel):
    reps: int
    functionals: List[FunctionalEstimate]
    dissipative_information: float
    relation_defect: float
    relation_std_error: float
    excluded: List[str] = []
    metadata: Dict[str, object] = {}

    def get(self, functional: str) -> FunctionalEstimate:
        return next(f for f in self.functionals if f.functional == functional)


def _trajectory_tables(data: ExperimentData, rep: int) -> Dict[str, Dict[Tuple[int, ...], Tuple[float, float, float]]]:
    """
    Per outcome (a, b, r, a', r'): forward probability, matched backward weight and
    sigma for each functional. Outcomes below the probability floor are skipped.
    """
    p_ab = data.p_ab_initial[rep]
    q_ab = data.p_ab_final[rep]
    p_r = data.p_r_forward[rep]
    q_r = data.p_r_backward[rep]
    t_f = data.t_forward[rep].reshape(2, 2, 2, 2)
    t_b = data.t_backward[rep].reshape(2, 2, 2, 2)
    p_a, p_b = p_ab.sum(axis=1), p_ab.sum(axis=0)
    q_a, q_b = q_ab.sum(axis=1), q_ab.sum(axis=0)
    floor = settings.PROBABILITY_FLOOR

    tables: Dict[str, Dict[Tuple[int, ...], Tuple[float, float, float]]] = {name: {} for name in FUNCTIONALS}
    for a, b, r, a2, r2 in itertools.product(range(2), repeat=5):
        p_f = p_ab[a, b] * p_r[r] * t_f[a, r, a2, r2]
        if p_f < floor or q_ab[a2, b] < floor or q_r[r2] < floor:
            continue
        transition_back = t_b[a2, r2, a, r]
        sigma_sm = np.log(p_ab[a, b] / p_b[b] * p_r[r]) - np.log(q_ab[a2, b] / q_b[b] * q_r[r2])
        sigma_s = np.log(p_a[a] * p_r[r]) - np.log(q_a[a2] * q_r[r2])
        outcome = (a, b, r, a2, r2)
        tables["sigma_s_given_m"][outcome] = (p_f, q_ab[a2, b] / q_b[b] * p_b[b] * q_r[r2] * transition_back, sigma_sm)
        tables["sigma_s"][outcome] = (p_f, q_a[a2] * q_r[r2] * transition_back * p_ab[a, b] / p_a[a], sigma_s)
        tables["sigma_i"][outcome] = (p_f, p_a[a] * p_r[r] * t_f[a, r, a2, r2] * q_ab[a2, b] / (q_a[a2] * q_b[b]) * p_b[b], sigma_sm - sigma_s)
    return tables


def _rep_estimates(table: Dict[Tuple[int, ...], Tuple[float, float, float]], functional: str) -> Tuple[float, float, Dict[str, float]]:
    ift_value = sum(p_f * np.exp(-sigma) for p_f, _, sigma in table.values())
    mean_value = sum(p_f * sigma for p_f, _, sigma in table.values())
    conditioned: Dict[str, float] = {}
    if functional in ("sigma_s_given_m", "sigma_i"):
        key_of = (lambda o: f"b={o[1]}") if functional == "sigma_s_given_m" else (lambda o: f"sr={o[0]}{o[2]}{o[3]}{o[4]}")
        totals: Dict[str, float] = {}
        sums: Dict[str, float] = {}
        for outcome, (p_f, _, sigma) in table.items():
            key = key_of(outcome)
            totals[key] = totals.get(key, 0.0) + p_f
            sums[key] = sums.get(key, 0.0) + p_f * np.exp(-sigma)
        conditioned = {key: sums[key] / totals[key] for key in sorted(totals) if totals[key] > 0}
    return float(ift_value), float(mean_value), conditioned


def _stderr(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    return float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0


def _mutual_information(p_ab: np.ndarray) -> float:
    """
    I(A:B) of a classical joint distribution, in nats
    """
    return float(entropy(p_ab.sum(axis=1)) + entropy(p_ab.sum(axis=0)) - entropy(p_ab.ravel()))


def reconstruct_ft(data: ExperimentData, tol: float = 1e-9) -> FTReport:
    """
    Integral and detailed fluctuation-theorem estimates from the circuit statistics.

    IFT values and averages are computed per replicate and summarized as mean
    and standard error; detailed-FT points come from the pooled statistics.
    The relation <sigma_S|M> - <sigma_S> = I_initial - I_final is checked against
    mutual informations read directly off the preparation and final circuits.
    """
    per_rep = [_trajectory_tables(data, rep) for rep in range(data.reps)]
    pooled_tables = _trajectory_tables(data.pooled(), 0)
    excluded: List[str] = []

    estimates = []
    rep_means: Dict[str, List[float]] = {}
    for functional in FUNCTIONALS:
        ifts, means, conditioned = [], [], []
        for tables in per_rep:
            ift_value, mean_value, cond = _rep_estimates(tables[functional], functional)
            ifts.append(ift_value)
            means.append(mean_value)
            conditioned.append(cond)
        rep_means[functional] = means
        keys = sorted(set().union(*conditioned)) if conditioned else []
        cond_summary = {
            key: (float(np.mean([c[key] for c in conditioned if key in c])), _stderr([c[key] for c in conditioned if key in c]))
            for key in keys
        }

        bins: Dict[float, Tuple[float, float, List[Tuple[int, ...]]]] = {}
        for outcome, (p_f, p_b, sigma) in sorted(pooled_tables[functional].items(), key=lambda item: item[1][2]):
            key = next((k for k in bins if abs(k - sigma) <= tol), sigma)
            f_sum, b_sum, members = bins.get(key, (0.0, 0.0, []))
            bins[key] = (f_sum + p_f, b_sum + p_b, members + [outcome])
        points = []
        for sigma, (f_sum, b_sum, members) in sorted(bins.items()):
            if f_sum <= 0 or b_sum <= 0:
                excluded.append(f"{functional}:sigma={sigma:.6g}")
                continue
            rep_ratios = []
            for tables in per_rep:
                f_rep = sum(tables[functional][o][0] for o in members if o in tables[functional])
                b_rep = sum(tables[functional][o][1] for o in members if o in tables[functional])
                if f_rep > 0 and b_rep > 0:
                    rep_ratios.append(np.log(f_rep / b_rep))
            points.append(FTPoint(sigma=sigma, logratio=float(np.log(f_sum / b_sum)), stderr=_stderr(rep_ratios)))

        slope = intercept = deviation = None
        if len(points) >= 2:
            slope, intercept = (float(v) for v in np.polyfit([pt.sigma for pt in points], [pt.logratio for pt in points], 1))
        if points:
            deviation = float(max(abs(pt.logratio - pt.sigma) for pt in points))

        estimates.append(FunctionalEstimate(
            functional=functional,
            estimate=float(np.mean(ifts)),
            std_error=_stderr(ifts),
            per_rep=ifts,
            mean_value=float(np.mean(means)),
            mean_std_error=_stderr(means),
            conditioned=cond_summary,
            bins=points,
            slope=slope,
            intercept=intercept,
            diagonal_deviation=deviation
        ))

    if excluded:
        logger.warning(f"Excluded {len(excluded)} empty detailed-FT bins")
    information = [_mutual_information(data.p_ab_initial[rep]) - _mutual_information(data.p_ab_final[rep])
                   for rep in range(data.reps)]
    relation = [sm - s - i for sm, s, i in zip(rep_means["sigma_s_given_m"], rep_means["sigma_s"], information)]
    worst = max(e.diagonal_deviation or 0.0 for e in estimates)
    logger.info(f"Largest detailed-FT deviation from the diagonal: {worst:.3e}")
    return FTReport(
        reps=data.reps,
        functionals=estimates,
        dissipative_information=float(np.mean(information)),
        relation_defect=float(np.mean(relation)),
        relation_std_error=_stderr(relation),
        excluded=excluded
    )


def emulate(config: EmulationConfig) -> FTReport:
    start_time = time.time()
    report = reconstruct_ft(run_experiment(config))
    report.metadata.update({
        "eps_c": config.eps_c,
        "beta_times_e_system": config.beta_times_e_system,
        "beta_times_e_reservoir": config.beta_times_e_reservoir,
        "g": config.g,
        "exact": config.exact,
        "shots_per_rep": config.shots.shots_per_rep,
        "reps": config.shots.reps,
        "seed": config.shots.seed,
        "readout_flip_prob": config.shots.readout_flip_prob,
        "readout_decay_prob": config.shots.readout_decay_prob,
        "thermal_angle": "printed" if config.printed_thermal_angle else "derived",
        "parameter_reading": "beta_S*E_S = 1, beta_R*E_R = 0.1",
    })
    logger.info(f"Emulation finished in {time.time() - start_time:.2f} seconds")
    return report


def transition_report(g: float, shot_config: ShotConfig) -> Dict[str, List[List[float]]]:
    """
    Theoretical against sampled forward and backward transition matrices
    """
    report: Dict[str, List[List[float]]] = {
        "forward_theory": transition_matrix(xy_unitary(g)).tolist(),
        "backward_theory": transition_matrix(xy_unitary(g).conj().T).tolist(),
    }
    for name, angle, offset in (("forward", g, 0), ("backward", -g, 4)):
        means, errors = [], []
        for j, bits in enumerate(itertools.product((0, 1), repeat=2)):
            counts = sample_circuit(basis_input_circuit(bits, decompose_xy(angle)), (0, 1), shot_config, stream=100 + offset + j)
            means.append(counts.mean().tolist())
            errors.append(counts.std_error().tolist())
        report[f"{name}_sampled"] = means
        report[f"{name}_std_error"] = errors
    return report


def shot_sweep(config: EmulationConfig, shots: Sequence[int], reps: int = 50) -> List[Dict[str, float]]:
    """
    RMS deviation of the IFT estimates from 1 against total shots per circuit
    """
    rows = []
    for count in shots:
        shot_config = config.shots.model_copy(update={"shots_per_rep": int(count), "reps": reps})
        report = reconstruct_ft(run_experiment(config.model_copy(update={"shots": shot_config, "exact": False})))
        deviations = np.concatenate([np.asarray(f.per_rep) - 1 for f in report.functionals])
        rows.append({
            "shots_per_rep": int(count),
            "total_shots": int(count) * reps,
            "rms_ift_error": float(np.sqrt(np.mean(deviations ** 2))),
        })
        logger.info(f"Shot sweep {count}: rms IFT error {rows[-1]['rms_ift_error']:.3e}")
    return rows


def scaling_slope(rows: Sequence[Dict[str, float]]) -> float:
    x = np.log([row["shots_per_rep"] for row in rows])
    y = np.log([row["rms_ift_error"] for row in rows])
    return float(np.polyfit(x, y, 1)[0])
