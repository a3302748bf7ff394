"""
Randomized checks of the entropy-production identities and inequalities.

Each suite returns one CheckResult per property with the worst defect over
its instances. Suites draw from their own child generator so adding a suite
does not shift the others' streams.
"""
import logging
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from config import settings
from core import densemath
from models.configs import CorrelationFamily, VerifyConfig
from models.quantum import DensityMatrix, QubitHamiltonian
from models.records import CheckResult, NonlocalParams, ProcessRecord
from models.trajectory import StochasticFunctional
from services import demon, emulator, thermo, trajectories
from services.collision import thermalization_channel, xy_unitary
from services.states import correlated_state, random_correlated_state, random_x_state, thermal_state

logger = logging.getLogger(__name__)

SUITES = ("hierarchy", "cmi", "bounds", "ift", "averages", "demon", "circuits", "collision")


def _check(name: str, defects: Sequence[float], tolerance: float, **details) -> CheckResult:
    worst = float(max(defects)) if len(defects) else 0.0
    result = CheckResult(
        name=name,
        worst_defect=worst,
        tolerance=tolerance,
        instances=len(defects),
        passed=bool(worst <= tolerance),
        details=details
    )
    level = logging.INFO if result.passed else logging.WARNING
    logger.log(level, f"{name}: worst defect {worst:.3e} over {len(defects)} instances (tol {tolerance:.0e})")
    return result


def random_coupling(rng: np.random.Generator) -> np.ndarray:
    """
    Haar-random or Weyl-chamber-random S-R unitary, with equal odds
    """
    if rng.random() < 0.5:
        return densemath.haar_unitary(4, rng)
    return demon.canonical_two_qubit(demon.random_nonlocal_params(rng), demon.random_local_unitaries(rng))


def random_record(rng: np.random.Generator, quench: bool = False) -> ProcessRecord:
    beta = float(rng.uniform(0.2, 3.0))
    h_r = QubitHamiltonian(excited_energy=float(rng.uniform(0.05, 2.0)))
    h_s = QubitHamiltonian(excited_energy=float(rng.uniform(0.05, 2.0)))
    h_s_final = QubitHamiltonian(excited_energy=float(rng.uniform(0.05, 2.0))) if quench else None
    return thermo.process_record(random_correlated_state(rng), random_coupling(rng), h_s, h_r, beta, h_s_final)


def hierarchy_suite(rng: np.random.Generator, instances: int, progress: bool = False) -> List[CheckResult]:
    """
    Sigma_{S|M} >= Sigma_S >= 0 and Sigma_I >= 0
    """
    order, positivity, information = [], [], []
    for _ in tqdm(range(instances), desc="hierarchy", disable=not progress):
        b = thermo.budget(random_record(rng))
        order.append(max(0.0, b.sigma_s - b.sigma_s_given_m))
        positivity.append(max(0.0, -b.sigma_s))
        information.append(max(0.0, -b.sigma_i))
    tol = settings.THEOREM_TOLERANCE
    return [
        _check("conditional_exceeds_unconditional", order, tol),
        _check("sigma_s_nonnegative", positivity, tol),
        _check("sigma_i_nonnegative", information, tol),
    ]


def cmi_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    """
    Sigma_I equals the final memory-reservoir conditional mutual information
    """
    cmi, conservation = [], []
    for _ in range(instances):
        checks = thermo.correlation_checks(random_record(rng))
        cmi.append(abs(checks["cmi_defect"]))
        conservation.append(abs(checks["i_sr_m_conservation_defect"]))
    tol = settings.IDENTITY_TOLERANCE
    return [
        _check("sigma_i_equals_final_cmi", cmi, tol),
        _check("memory_correlation_conserved", conservation, tol),
    ]


def bounds_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    margins: Dict[str, List[float]] = {}
    energy = []
    for _ in range(instances):
        record = random_record(rng, quench=True)
        for name, margin in thermo.bounds_check(record).margins.items():
            margins.setdefault(name, []).append(max(0.0, -margin))
        energy.append(abs(thermo.energy_audit(record)))
    tol = settings.THEOREM_TOLERANCE
    return [_check(f"bound_{name}", values, tol) for name, values in sorted(margins.items())] + [
        _check("first_law", energy, tol)
    ]


def _flipped(functional: StochasticFunctional) -> StochasticFunctional:
    return StochasticFunctional(
        functional.kind, functional.scheme,
        {o: -v for o, v in functional.values.items()},
        functional.backward, functional.excluded
    )


def reference_process() -> trajectories.TrajectoryProcess:
    """
    Classical correlations eps_c = 0.5 at beta*E_S = 1, reservoir beta*E_R = 0.1, g = 1
    """
    rho_sm = correlated_state(CorrelationFamily(kind="classical", beta_times_e=1.0, noise=0.5))
    rho_r = thermal_state(QubitHamiltonian(excited_energy=0.1), 1.0)
    return trajectories.process_from_states(rho_sm, rho_r, xy_unitary(1.0))


def _random_ift_process(rng: np.random.Generator) -> trajectories.TrajectoryProcess:
    rho_r = thermal_state(QubitHamiltonian(excited_energy=float(rng.uniform(0.05, 2.0))), 1.0)
    return trajectories.process_from_states(random_x_state(rng), rho_r, densemath.haar_unitary(4, rng))


def degenerate_basis_process(rng: np.random.Generator) -> trajectories.TrajectoryProcess:
    """
    Reference process with the global scheme measured in a rotated eigenbasis
    of the degenerate |01>, |10> pair of the classically correlated state
    """
    rho_sm = correlated_state(CorrelationFamily(kind="classical", beta_times_e=1.0, noise=0.5))
    rho_r = thermal_state(QubitHamiltonian(excited_energy=0.1), 1.0)
    basis = trajectories.rotate_degenerate_basis(rho_sm.eigensystem(), rng)
    return trajectories.process_from_states(rho_sm, rho_r, xy_unitary(1.0), sm_initial_basis=basis)


def ift_defects(process: trajectories.TrajectoryProcess, scheme: str = "both", flip: bool = False) -> Dict[str, float]:
    """
    |<exp(-sigma)> - 1| for every functional and every conditioning of one process
    """
    transform: Callable[[StochasticFunctional], StochasticFunctional] = _flipped if flip else (lambda f: f)
    defects: Dict[str, float] = {}
    if scheme in ("global", "both"):
        dist_f, _ = process.pair("global")
        functional = transform(process.functional("sigma_s_given_m_global"))
        defects["sigma_s_given_m_global"] = abs(trajectories.ift(dist_f, functional) - 1)
    if scheme in ("local", "both"):
        dist_f, _ = process.pair("local")
        for kind in trajectories.LOCAL_KINDS:
            functional = transform(process.functional(kind))
            defects[kind] = abs(trajectories.ift(dist_f, functional) - 1)
        conditioned = (("sigma_s_given_m_local", "b"), ("sigma_i_local", "sr"))
        for kind, condition in conditioned:
            values = trajectories.ift_conditioned(dist_f, transform(process.functional(kind)), condition)
            defects[f"{kind}|{condition}"] = max(abs(v - 1) for v in values.values())
    return defects


def ift_suite(rng: np.random.Generator, instances: int, scheme: str = "both", flip: bool = False) -> List[CheckResult]:
    collected: Dict[str, List[float]] = {}
    processes = [reference_process()] + [_random_ift_process(rng) for _ in range(instances)]
    for process in processes:
        for name, defect in ift_defects(process, scheme, flip).items():
            collected.setdefault(name, []).append(defect)
    degenerate = ift_defects(degenerate_basis_process(rng), scheme, flip)
    tol = settings.IDENTITY_TOLERANCE
    return [_check(f"ift_{name}", values, tol, scheme=scheme) for name, values in collected.items()] + [
        _check("ift_degenerate_basis", list(degenerate.values()), tol, scheme=scheme)
    ]


def averages_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    """
    Trajectory averages against ensemble values, and Delta J = 0 for
    coherence-free states under the XY collision
    """
    defects: Dict[str, List[float]] = {}
    processes = [reference_process()] + [_random_ift_process(rng) for _ in range(instances)]
    for process in processes:
        report = trajectories.averages_report(process)
        for name, defect in report.defects.items():
            if report.local_identities_apply or name not in ("sigma_s_given_m_local", "sigma_i_local"):
                defects.setdefault(name, []).append(abs(defect))

    delta_j = []
    for _ in range(instances):
        family = CorrelationFamily(kind="classical", p=float(rng.uniform(0.05, 0.95)), noise=float(rng.uniform(0, 1)))
        rho_r = thermal_state(QubitHamiltonian(excited_energy=float(rng.uniform(0.05, 2.0))), 1.0)
        process = trajectories.process_from_states(correlated_state(family), rho_r, xy_unitary(float(rng.uniform(0, np.pi))))
        delta_j.append(abs(trajectories.averages_report(process).delta_j))

    tol = settings.THEOREM_TOLERANCE
    return [_check(f"average_{name}", values, tol) for name, values in sorted(defects.items())] + [
        _check("delta_j_vanishes_without_coherence", delta_j, 1e-12)
    ]


def demon_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    """
    Feedback identities at beta in {0, 2}, deferred measurement, no entropy
    decrease at infinite temperature, and SWAP purification
    """
    identity, infinite_temperature, deferral, measurement_entropy = [], [], [], []
    for beta in (0.0, 2.0):
        for kind in demon.FEEDBACK_KINDS:
            for i in range(instances):
                record = demon.demon_sample(i, beta, kind, rng)
                identity.append(abs(record.identity_defect))
                if kind == "measurement":
                    deferral.append(record.deferral_defect)
                    measurement_entropy.append(max(0.0, -record.measurement_entropy))
                if beta == 0.0 and kind == "unitary":
                    infinite_temperature.append(max(0.0, record.delta_s_s))

    swap = NonlocalParams(c_x=np.pi / 4, c_y=np.pi / 4, c_z=np.pi / 4)
    identity_locals = tuple(np.eye(2, dtype=complex) for _ in range(4))
    swapped = demon.demon_sample(0, 2.0, "unitary", rng, gate=(swap, identity_locals))
    tol = settings.THEOREM_TOLERANCE
    return [
        _check("demon_identity", identity, tol),
        _check("measurement_deferral", deferral, 1e-10),
        _check("measurement_entropy_nonnegative", measurement_entropy, tol),
        _check("no_cooling_at_infinite_temperature", infinite_temperature, 1e-12),
        _check("swap_purifies_system", [swapped.system_entropy_final], 1e-10),
    ]


def circuits_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    decomposition = []
    for g in rng.uniform(-np.pi, np.pi, size=instances):
        circuit = emulator.decompose_xy(float(g))
        decomposition.append(densemath.global_phase_distance(circuit.unitary(), xy_unitary(float(g))))

    diagonals = []
    for _ in range(instances):
        p, eps_c = float(rng.uniform(0.05, 0.95)), float(rng.uniform(0, 1))
        prepared = emulator.marginal_probabilities(emulator.simulate_statevector(emulator.prep_circuit(p, eps_c)), 2, (1, 0))
        target = np.real(np.diag(correlated_state(CorrelationFamily(kind="classical", p=p, noise=eps_c)).matrix))
        diagonals.append(float(np.max(np.abs(prepared - target))))

    thermal = []
    for beta_times_e in rng.uniform(0, 5, size=instances):
        reduced = emulator.marginal_probabilities(
            emulator.simulate_statevector(emulator.thermal_circuit(float(beta_times_e))), 2, (0,))
        excited = np.exp(-beta_times_e) / (1 + np.exp(-beta_times_e))
        thermal.append(abs(reduced[1] - excited))

    return [
        _check("xy_decomposition", decomposition, 1e-10),
        _check("prep_diagonal", diagonals, 1e-9),
        _check("thermal_prep", thermal, 1e-12),
    ]


def collision_suite(rng: np.random.Generator, instances: int) -> List[CheckResult]:
    """
    Closed-form single-collision channel against the partial trace of the XY evolution
    """
    channel = []
    for _ in range(instances):
        g, p_r = float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(0.0, 0.5))
        rho_s = DensityMatrix(densemath.random_density_matrix(2, rng), (2,), ("S",))
        rho_r = DensityMatrix(np.diag([1 - p_r, p_r]).astype(complex), (2,), ("R",))
        expected = rho_s.tensor(rho_r).evolve(xy_unitary(g), ["S", "R"]).reduce(["S"])
        channel.append(densemath.trace_distance(thermalization_channel(rho_s, g, p_r), expected))
    return [_check("collision_channel", channel, 1e-12)]


def run_verification(config: VerifyConfig, suites: Optional[Sequence[str]] = None, progress: Optional[bool] = None) -> List[CheckResult]:
    """
    Run the requested suites (all by default); a sign flip applied to the
    stochastic functionals makes the fluctuation-theorem checks fail
    """
    start_time = time.time()
    progress = settings.SHOW_PROGRESS if progress is None else progress
    suites = SUITES if suites is None else suites
    generators = dict(zip(SUITES, (np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(len(SUITES)))))
    if config.inject_sign_flip:
        logger.warning("Sign flip injected into the stochastic functionals")

    results: List[CheckResult] = []
    for suite in suites:
        rng = generators[suite]
        if suite == "hierarchy":
            results += hierarchy_suite(rng, config.instances, progress)
        elif suite == "cmi":
            results += cmi_suite(rng, config.ift_instances)
        elif suite == "bounds":
            results += bounds_suite(rng, config.instances)
        elif suite == "ift":
            results += ift_suite(rng, config.ift_instances, config.scheme, config.inject_sign_flip)
        elif suite == "averages":
            results += averages_suite(rng, config.ift_instances)
        elif suite == "demon":
            results += demon_suite(rng, config.ift_instances)
        elif suite == "circuits":
            results += circuits_suite(rng, 100)
        elif suite == "collision":
            results += collision_suite(rng, config.instances)

    failed = [r.name for r in results if not r.passed]
    logger.info(f"Verification finished in {time.time() - start_time:.2f} seconds, {len(failed)} of {len(results)} checks failed")
    return results
