import numpy as np
import pytest
from scipy.linalg import expm

from core import densemath
from core.densemath import PAULI_X, PAULI_Y
from core.errors import ParameterRegimeError
from models.configs import CorrelationFamily, ProtocolConfig
from models.quantum import DensityMatrix, QubitHamiltonian
from services import collision, infomeasures, thermo
from services.states import correlated_state, thermal_state

P_INITIAL = 1 / (1 + np.exp(-1.0))


def _excited(beta_times_e):
    return 1 / (1 + np.exp(beta_times_e))


@pytest.fixture(scope="module")
def classical_run():
    return collision.run_protocol(ProtocolConfig(), progress=False)


@pytest.fixture(scope="module")
def quantum_run():
    config = ProtocolConfig(correlation=CorrelationFamily(kind="quantum"))
    return collision.run_protocol(config, progress=False)


@pytest.mark.parametrize("g", [0.0, 0.1, 1.0, -0.7])
def test_xy_unitary_matches_generator(g):
    generator = np.kron(PAULI_X, PAULI_Y) - np.kron(PAULI_Y, PAULI_X)
    assert np.allclose(collision.xy_unitary(g), expm(-1j * g * generator), atol=1e-12)


def test_xy_unitary_swaps_at_quarter_pi():
    u = collision.xy_unitary(np.pi / 4)
    assert abs(u[1, 2]) == pytest.approx(1.0)
    assert abs(u[1, 1]) < 1e-12


def test_thermalization_channel_matches_partial_trace(rng):
    g, p_r = 0.37, 0.3
    rho_s = densemath.random_density_matrix(2, rng)
    rho_r = np.diag([1 - p_r, p_r]).astype(complex)
    joint = collision.xy_unitary(g) @ np.kron(rho_s, rho_r) @ collision.xy_unitary(g).conj().T
    expected = densemath.partial_trace(joint, [2, 2], [0])
    channel = collision.thermalization_channel(DensityMatrix(rho_s, (2,), ("S",)), g, p_r)
    assert np.allclose(channel.matrix, expected, atol=1e-12)


def test_reservoir_energy_reaches_quenched_thermal_state():
    beta, g, e_s, delta_e = 1.0, 0.1, 0.8, 0.0045
    e_r = collision.reservoir_energy(e_s, delta_e, beta, g)
    p_s = _excited(beta * e_s)
    p_r = _excited(beta * e_r)
    after = np.cos(2 * g) ** 2 * p_s + np.sin(2 * g) ** 2 * p_r
    assert after == pytest.approx(_excited(beta * (e_s - delta_e)), abs=1e-12)


def test_reservoir_energy_regime_errors():
    with pytest.raises(ParameterRegimeError):
        collision.reservoir_energy(1.0, 0.1, 0.0, 0.1)
    with pytest.raises(ParameterRegimeError):
        collision.reservoir_energy(1.0, 0.1, 1.0, np.pi / 2)
    with pytest.raises(ParameterRegimeError) as info:
        collision.reservoir_energy(0.19, 0.09, 1.0, 0.1)
    assert "log_argument" in info.value.details


def test_protocol_config_requires_whole_steps():
    with pytest.raises(ValueError):
        ProtocolConfig(delta_e=0.007)
    assert ProtocolConfig().steps == 200


def test_protocol_stays_on_thermal_fixed_points(classical_run):
    assert len(classical_run) == 200
    assert max(classical_run.thermal_distance) < 1e-9
    assert classical_run.final("e_s") == pytest.approx(0.1)


def test_dissipative_information_uses_up_the_correlations(classical_run, quantum_run):
    h = infomeasures.binary_entropy(P_INITIAL)
    assert classical_run.initial_mutual_info == pytest.approx(h)
    assert classical_run.final("sigma_i") == pytest.approx(h, rel=0.01)
    assert quantum_run.final("sigma_i") == pytest.approx(2 * h, rel=0.01)


def test_curve_ordering(classical_run, quantum_run):
    for q, c, s in zip(quantum_run.sigma_s_given_m, classical_run.sigma_s_given_m, classical_run.sigma_s):
        assert q >= c - 1e-9
        assert c >= s - 1e-9
    assert np.allclose(quantum_run.sigma_s, classical_run.sigma_s, atol=1e-10)


def test_unconditional_production_is_small(classical_run):
    beta, delta_e, g = 1.0, 0.0045, 0.1
    estimate = beta * delta_e * (1 / np.sin(2 * g) ** 2 - 0.5) * (_excited(0.1) - _excited(1.0))
    final = classical_run.final("sigma_s")
    assert final == pytest.approx(estimate, rel=0.15)
    assert final < 0.05 * infomeasures.binary_entropy(P_INITIAL)


def test_unconditional_production_halves_with_the_step(classical_run):
    finer = collision.run_protocol(ProtocolConfig(delta_e=0.00225), progress=False)
    ratio = classical_run.final("sigma_s") / finer.final("sigma_s")
    assert 1.8 < ratio < 2.2


def test_work_minus_free_energy_is_sigma_s(classical_run):
    gap = classical_run.total_work - classical_run.final("delta_f_s")
    assert gap == pytest.approx(classical_run.final("sigma_s"), abs=1e-10)
    assert classical_run.final("delta_f_s") == pytest.approx(collision.free_energy_change(ProtocolConfig()), abs=1e-8)


def test_product_family_has_no_dissipative_information(short_protocol):
    config = short_protocol.with_correlation(CorrelationFamily(kind="product"))
    series = collision.run_protocol(config, progress=False)
    assert max(abs(v) for v in series.sigma_i) < 1e-10


def test_step_budget_and_cmi_cross_check(short_protocol):
    config = short_protocol.model_copy(update={"retain_msr": True})
    state = correlated_state(config.correlation, config.beta * config.e_initial)
    _, result = collision.step(state, config.e_initial, config)
    assert result.e_s_after == pytest.approx(config.e_initial - config.delta_e)
    assert abs(result.cmi_defect) < 1e-10
    assert result.work_quench < 0


def test_bounds_hold_along_the_protocol(short_protocol):
    for kind in ("classical", "quantum"):
        config = short_protocol.with_correlation(CorrelationFamily(kind=kind, noise=0.3))
        state = correlated_state(config.correlation, config.beta * config.e_initial)
        e_s = config.e_initial
        for n in range(config.steps):
            e_r = collision.reservoir_energy(e_s, config.delta_e, config.beta, config.g)
            record = thermo.process_record(
                state, collision.xy_unitary(config.g), QubitHamiltonian(excited_energy=e_s),
                QubitHamiltonian(excited_energy=e_r), config.beta,
                h_s_final=QubitHamiltonian(excited_energy=e_s - config.delta_e)
            )
            assert thermo.bounds_check(record).passed
            state, e_s = record.rho_sm_final, e_s - config.delta_e


def test_quench_work_converges_linearly():
    rows = collision.convergence_scan(ProtocolConfig(delta_e=0.009), factors=(1, 2))
    ratio = rows[0]["gap_quench"] / rows[1]["gap_quench"]
    assert 1.7 < ratio < 2.3
    assert rows[1]["steps"] == 2 * rows[0]["steps"]


def test_noise_sweep_shrinks_dissipative_information(short_protocol):
    sweep = collision.run_noise_sweep(short_protocol, [0.0, 0.5, 1.0])
    classical, quantum = sweep.final("classical"), sweep.final("quantum")
    assert sweep.noise == [0.0, 0.5, 1.0]
    assert classical[0] > classical[1] > classical[2] - 1e-12
    assert classical[2] == pytest.approx(0.0, abs=1e-10)
    assert quantum[0] > classical[0]
    assert [row["classical"] for row in sweep.rows()] == classical


def test_noise_sweep_keeps_the_full_time_grid(short_protocol):
    sweep = collision.run_noise_sweep(short_protocol, [0.0, 0.5])
    assert sweep.steps == list(range(1, short_protocol.steps + 1))
    for kind in ("classical", "quantum"):
        assert np.asarray(sweep.grid[kind]).shape == (2, short_protocol.steps)
        assert [row[-1] for row in sweep.grid[kind]] == sweep.final(kind)
    family = CorrelationFamily(kind="classical", noise=0.5, p=short_protocol.correlation.p,
                               beta_times_e=short_protocol.correlation.beta_times_e)
    series = collision.run_protocol(short_protocol.with_correlation(family), progress=False)
    assert sweep.grid["classical"][1] == pytest.approx(series.sigma_i, abs=1e-12)
    assert sweep.grid["classical"][1][-1] == pytest.approx(series.final("sigma_i"), abs=1e-12)
    rows = sweep.grid_rows()
    assert len(rows) == 2 * 2 * short_protocol.steps
    assert rows[0] == {"kind": "classical", "noise": 0.0, "step": 1, "sigma_i": sweep.grid["classical"][0][0]}


def test_thermal_state_label_for_reservoir():
    assert thermal_state(QubitHamiltonian(excited_energy=1.0), 1.0).labels == ("R",)
