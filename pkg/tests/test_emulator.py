import numpy as np
import pytest
from pydantic import ValidationError

from core import densemath
from core.errors import NonUnitaryError
from models.circuit import Circuit, CountsHistogram, Gate
from models.configs import CorrelationFamily, EmulationConfig, ShotConfig
from services import emulator, trajectories
from services.collision import xy_unitary
from services.states import correlated_state


@pytest.fixture(scope="module")
def exact_report():
    return emulator.emulate(EmulationConfig(exact=True))


def test_gate_arity_is_validated():
    with pytest.raises(ValidationError):
        Gate(kind="cnot", qubits=(0,))
    with pytest.raises(ValidationError):
        Gate(kind="cnot", qubits=(1, 1))
    with pytest.raises(ValidationError):
        Gate(kind="ry", qubits=(0,))
    with pytest.raises(ValidationError):
        Gate(kind="h", qubits=(0,), theta=0.3)


def test_circuit_width_is_validated():
    with pytest.raises(ValidationError):
        Circuit(width=2, gates=[Gate(kind="h", qubits=(3,))])
    with pytest.raises(ValidationError):
        Circuit(width=5)


def test_counts_must_cover_every_shot():
    with pytest.raises(ValidationError):
        CountsHistogram(bitstrings=["0", "1"], counts=[[3, 4]], shots_per_rep=8)


def test_circuit_placement_on_wider_register():
    placed = Circuit(width=2, gates=[Gate(kind="cnot", qubits=(0, 1))]).on(4, (2, 3))
    expected = densemath.embed_operator(Gate(kind="cnot", qubits=(0, 1)).matrix, [2] * 4, [2, 3])
    assert np.allclose(placed.unitary(), expected)


@pytest.mark.parametrize("g", [0.0, 0.1, 0.5, 1.0, -2.3])
def test_xy_decomposition(g):
    assert densemath.global_phase_distance(emulator.decompose_xy(g).unitary(), xy_unitary(g)) < 1e-10


@pytest.mark.parametrize("eps_c", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("p", [0.2, 0.5, 1 / (1 + np.exp(-1.0))])
def test_prep_circuit_diagonal(p, eps_c):
    state = emulator.simulate_statevector(emulator.prep_circuit(p, eps_c))
    prepared = emulator.marginal_probabilities(state, 2, (1, 0))
    target = np.real(np.diag(correlated_state(CorrelationFamily(kind="classical", p=p, noise=eps_c)).matrix))
    assert np.allclose(prepared, target, atol=1e-10)


def test_thermal_angle():
    assert emulator.thermal_prep_angle(0.0) == pytest.approx(np.pi / 2)
    assert emulator.thermal_prep_angle(1.0, printed=True) != pytest.approx(emulator.thermal_prep_angle(1.0))


@pytest.mark.parametrize("beta_times_e", [0.0, 0.1, 1.0, 4.0])
def test_thermal_circuit_reduced_state(beta_times_e):
    state = emulator.simulate_statevector(emulator.thermal_circuit(beta_times_e))
    reduced = emulator.marginal_probabilities(state, 2, (0,))
    assert reduced[1] == pytest.approx(np.exp(-beta_times_e) / (1 + np.exp(-beta_times_e)), abs=1e-12)


def test_marginal_ordering():
    state = np.zeros(8, dtype=complex)
    state[0b011] = 1
    assert np.allclose(emulator.marginal_probabilities(state, 3, (2, 0)), [0, 0, 1, 0])


def test_transition_matrix():
    assert np.allclose(emulator.transition_matrix(np.eye(4)), np.eye(4))
    u = xy_unitary(0.7)
    forward = emulator.transition_matrix(u)
    assert np.allclose(forward.sum(axis=1), 1)
    assert np.allclose(forward.sum(axis=0), 1)
    assert np.allclose(emulator.transition_matrix(u.conj().T), forward.T)
    with pytest.raises(NonUnitaryError):
        emulator.transition_matrix(np.ones((4, 4)))


def test_point_mass_sampling():
    counts = emulator.sample_counts(np.array([0, 0, 1, 0]), ShotConfig(shots_per_rep=100, reps=3))
    assert counts.bitstrings == ["00", "01", "10", "11"]
    assert counts.counts == [[0, 0, 100, 0]] * 3


def test_uniform_sampling_statistics():
    shots = 40000
    counts = emulator.sample_counts(np.full(4, 0.25), ShotConfig(shots_per_rep=shots, reps=1))
    sigma = np.sqrt(0.25 * 0.75 / shots)
    assert np.all(np.abs(counts.frequencies()[0] - 0.25) < 5 * sigma)


def test_sampling_is_seeded():
    config = ShotConfig(shots_per_rep=500, reps=4, seed=3)
    assert emulator.sample_counts(np.full(4, 0.25), config, 1) == emulator.sample_counts(np.full(4, 0.25), config, 1)
    assert emulator.sample_counts(np.full(4, 0.25), config, 1) != emulator.sample_counts(np.full(4, 0.25), config, 2)


def test_readout_error():
    assert np.allclose(emulator.apply_readout_error(np.array([1.0, 0.0]), 0.01), [0.99, 0.01])
    shots = 100000
    counts = emulator.sample_counts(np.array([1.0, 0.0]), ShotConfig(shots_per_rep=shots, reps=1, readout_flip_prob=0.0103))
    sigma = np.sqrt(0.0103 * (1 - 0.0103) / shots)
    assert abs(counts.frequencies()[0][1] - 0.0103) < 5 * sigma


def test_asymmetric_readout_channel():
    assert ShotConfig().readout_channel() is None
    assert ShotConfig(readout_flip_prob=0.03).readout_channel() == (0.03, 0.03)
    assert ShotConfig(readout_flip_prob=0.02, readout_decay_prob=0.08).readout_channel() == (0.02, 0.08)
    assert ShotConfig(readout_decay_prob=0.08).readout_channel() == (0.0, 0.08)
    assert np.allclose(emulator.apply_readout_error(np.array([0.0, 1.0]), 0.02, 0.08), [0.08, 0.92])
    two_qubits = emulator.apply_readout_error(np.array([0.0, 0.0, 0.0, 1.0]), 0.02, 0.08)
    assert np.allclose(two_qubits, [0.08 ** 2, 0.08 * 0.92, 0.08 * 0.92, 0.92 ** 2])


def test_symmetric_readout_keeps_the_exact_diagonal():
    report = emulator.emulate(EmulationConfig(exact=True, shots=ShotConfig(readout_flip_prob=0.05)))
    for estimate in report.functionals:
        assert estimate.diagonal_deviation < 1e-9


def test_asymmetric_readout_moves_points_off_the_diagonal(exact_report):
    noisy = emulator.emulate(EmulationConfig(exact=True, shots=ShotConfig(readout_flip_prob=0.01, readout_decay_prob=0.05)))
    for functional in ("sigma_s_given_m", "sigma_s"):
        assert exact_report.get(functional).diagonal_deviation < 1e-9
        assert noisy.get(functional).diagonal_deviation > 1.0
    assert noisy.get("sigma_i").diagonal_deviation < 1e-9


def test_shot_based_readout_error_is_visible_in_the_detailed_theorem():
    baseline = emulator.emulate(EmulationConfig(shots=ShotConfig(seed=11)))
    noisy = emulator.emulate(EmulationConfig(shots=ShotConfig(seed=11, readout_flip_prob=0.02, readout_decay_prob=0.08)))
    for functional in ("sigma_s_given_m", "sigma_s"):
        assert noisy.get(functional).diagonal_deviation > baseline.get(functional).diagonal_deviation + 0.5
    assert noisy.metadata["readout_decay_prob"] == 0.08


def test_exact_integral_theorems(exact_report):
    assert exact_report.reps == 1
    assert [f.functional for f in exact_report.functionals] == list(emulator.FUNCTIONALS)
    for estimate in exact_report.functionals:
        assert estimate.estimate == pytest.approx(1.0, abs=1e-10)
        assert estimate.slope == pytest.approx(1.0, abs=1e-8)
        assert estimate.intercept == pytest.approx(0.0, abs=1e-8)
    assert abs(exact_report.relation_defect) < 1e-10
    assert exact_report.dissipative_information > 0
    for value, _ in exact_report.get("sigma_s_given_m").conditioned.values():
        assert value == pytest.approx(1.0, abs=1e-10)
    for value, _ in exact_report.get("sigma_i").conditioned.values():
        assert value == pytest.approx(1.0, abs=1e-10)


def test_exact_means_match_trajectory_enumeration(exact_report, reference_sm, reference_reservoir):
    process = trajectories.process_from_states(reference_sm, reference_reservoir, xy_unitary(1.0))
    averages = trajectories.averages_report(process)
    assert exact_report.get("sigma_s_given_m").mean_value == pytest.approx(averages.mean_sigma_s_given_m_local, abs=1e-8)
    assert exact_report.get("sigma_s").mean_value == pytest.approx(averages.mean_sigma_s, abs=1e-8)
    assert exact_report.get("sigma_i").mean_value == pytest.approx(averages.mean_sigma_i_local, abs=1e-8)


def test_emulation_metadata(exact_report):
    assert exact_report.metadata["exact"] is True
    assert exact_report.metadata["thermal_angle"] == "derived"
    assert exact_report.metadata["g"] == 1.0


def test_shot_based_integral_theorems():
    report = emulator.emulate(EmulationConfig())
    assert report.reps == 5
    for estimate in report.functionals:
        assert len(estimate.per_rep) == 5
        assert abs(estimate.estimate - 1) < 0.05
        assert estimate.std_error > 0
        assert 0.9 < estimate.slope < 1.1
    assert report.relation_std_error > 0
    assert abs(report.relation_defect) < max(5 * report.relation_std_error, 0.05)
    assert report.dissipative_information > 0


def test_printed_angle_breaks_the_reservoir_state():
    data = emulator.run_experiment(EmulationConfig(exact=True, printed_thermal_angle=True))
    excited = np.exp(-0.1) / (1 + np.exp(-0.1))
    assert abs(data.p_r_forward[0][1] - excited) > 0.05


def test_experiment_shapes():
    data = emulator.run_experiment(EmulationConfig(shots=ShotConfig(shots_per_rep=256, reps=3)))
    assert data.reps == 3
    assert data.p_ab_initial.shape == (3, 2, 2)
    assert data.t_forward.shape == (3, 4, 4)
    assert np.allclose(data.t_forward.sum(axis=2), 1)
    assert data.pooled().reps == 1


def test_transition_report():
    report = emulator.transition_report(1.0, ShotConfig(shots_per_rep=2000, reps=3))
    assert set(report) == {
        "forward_theory", "backward_theory", "forward_sampled", "forward_std_error",
        "backward_sampled", "backward_std_error",
    }
    assert np.allclose(report["backward_theory"], np.asarray(report["forward_theory"]).T)
    assert np.max(np.abs(np.asarray(report["forward_sampled"]) - np.asarray(report["forward_theory"]))) < 0.05


def test_shot_noise_scaling():
    rows = emulator.shot_sweep(EmulationConfig(), [1024, 4096, 16384, 65536], reps=50)
    assert [row["total_shots"] for row in rows] == [1024 * 50, 4096 * 50, 16384 * 50, 65536 * 50]
    assert -0.62 < emulator.scaling_slope(rows) < -0.38
