import numpy as np
import pytest

from core import densemath
from core.errors import DimensionError
from models.quantum import DensityMatrix, QubitHamiltonian
from models.records import NonlocalParams
from services import demon, infomeasures
from services.states import pure_state, thermal_state

SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)
IDENTITY_LOCALS = tuple(np.eye(2, dtype=complex) for _ in range(4))


def test_canonicalize_folds_into_weyl_chamber(rng):
    for _ in range(200):
        raw = rng.uniform(-np.pi, np.pi, size=3)
        params = demon.canonicalize(NonlocalParams(c_x=raw[0], c_y=raw[1], c_z=raw[2]))
        assert params.is_canonical(atol=1e-9)


def test_random_params_are_canonical(rng):
    for _ in range(50):
        assert demon.random_nonlocal_params(rng).is_canonical(atol=1e-9)


def test_swap_point_of_canonical_gate():
    params = NonlocalParams(c_x=np.pi / 4, c_y=np.pi / 4, c_z=np.pi / 4)
    gate = demon.canonical_two_qubit(params, IDENTITY_LOCALS)
    assert np.allclose(gate, np.exp(1j * np.pi / 4) * SWAP, atol=1e-12)


def test_canonical_gate_needs_four_locals():
    params = NonlocalParams(c_x=0.1, c_y=0.0, c_z=0.0)
    with pytest.raises(DimensionError):
        demon.canonical_two_qubit(params, IDENTITY_LOCALS[:3])


def test_canonical_gate_is_unitary(rng):
    gate = demon.canonical_two_qubit(demon.random_nonlocal_params(rng), demon.random_local_unitaries(rng))
    assert densemath.is_unitary(gate)


def test_unitary_feedback_blocks(rng):
    u0, u1 = densemath.haar_unitary(2, rng), densemath.haar_unitary(2, rng)
    feedback = demon.unitary_feedback(u0, u1)
    assert np.allclose(feedback[:2, :2], u0)
    assert np.allclose(feedback[2:, 2:], u1)
    assert np.allclose(feedback[:2, 2:], 0)
    assert np.allclose(feedback[2:, :2], 0)


def test_measurement_feedback_removes_memory_coherence(rng):
    memory = pure_state([1, 1], (2,), ("M",))
    system = thermal_state(QubitHamiltonian(excited_energy=1.0), 1.0, label="S")
    state = memory.tensor(system).evolve(densemath.haar_unitary(4, rng), ["M", "S"])
    u0, u1 = densemath.haar_unitary(2, rng), densemath.haar_unitary(2, rng)
    after, probabilities = demon.measurement_feedback(state, u0, u1)
    assert probabilities.sum() == pytest.approx(1.0)
    assert np.all(probabilities >= 0)
    assert after.labels == ("M", "S")
    assert np.trace(after.matrix).real == pytest.approx(1.0)
    assert infomeasures.dephased_mutual_information(after, "M") == pytest.approx(
        infomeasures.mutual_information(after), abs=1e-9)


@pytest.mark.parametrize("kind", demon.FEEDBACK_KINDS)
@pytest.mark.parametrize("beta", [0.0, 2.0])
def test_feedback_identity(rng, kind, beta):
    for i in range(50):
        record = demon.demon_sample(i, beta, kind, rng)
        assert abs(record.identity_defect) < 1e-9
        assert record.feedback_kind == kind


def test_unitary_feedback_cannot_heat_a_maximally_mixed_system(rng):
    for i in range(50):
        record = demon.demon_sample(i, 0.0, "unitary", rng)
        assert record.system_entropy_initial == pytest.approx(np.log(2))
        assert record.delta_s_s <= 1e-12


def test_swap_purifies_the_system(rng):
    swap = NonlocalParams(c_x=np.pi / 4, c_y=np.pi / 4, c_z=np.pi / 4)
    record = demon.demon_sample(0, 2.0, "unitary", rng, gate=(swap, IDENTITY_LOCALS))
    assert record.system_entropy_final < 1e-10
    assert record.mutual_info_final == pytest.approx(0.0, abs=1e-10)
    assert record.delta_s_s == pytest.approx(-record.memory_entropy_final, abs=1e-10)


def test_identity_gate_changes_nothing(rng):
    record = demon.demon_sample(0, 2.0, "unitary", rng, gate=(NonlocalParams(c_x=0, c_y=0, c_z=0), IDENTITY_LOCALS))
    assert record.delta_s_s == pytest.approx(0.0, abs=1e-12)
    assert record.memory_entropy_final == pytest.approx(0.0, abs=1e-10)


def test_unknown_feedback_kind(rng):
    with pytest.raises(DimensionError):
        demon.demon_sample(0, 1.0, "telepathy", rng)


def test_scatter_is_reproducible():
    first = demon.demon_scatter(2.0, 20, 7, "unitary", progress=False)
    second = demon.demon_scatter(2.0, 20, 7, "unitary", progress=False)
    other = demon.demon_scatter(2.0, 20, 8, "unitary", progress=False)
    assert [r.sample_id for r in first] == list(range(20))
    assert first == second
    assert first != other


def test_scatter_streams_differ_by_kind():
    unitary = demon.demon_scatter(0.0, 5, 7, "unitary", progress=False)
    measured = demon.demon_scatter(0.0, 5, 7, "measurement", progress=False)
    assert [r.c_x for r in unitary] != [r.c_x for r in measured]


def test_deferred_measurement_matches_measure_then_apply(rng):
    for _ in range(10):
        vector = densemath.haar_unitary(4, rng)[:, 0]
        state = DensityMatrix(np.outer(vector, vector.conj()), (2, 2), ("M", "S"))
        u0, u1 = densemath.haar_unitary(2, rng), densemath.haar_unitary(2, rng)
        measured, _ = demon.measurement_feedback(state, u0, u1)
        deferred = demon.deferred_feedback(state, u0, u1)
        assert densemath.trace_distance(measured.matrix, deferred.matrix) < 1e-10

        memory = state.reduce(["M"]).eigensystem().eigenvectors
        rotate = np.kron(memory, np.eye(2))
        coherent = state.evolve(rotate @ demon.unitary_feedback(u0, u1) @ rotate.conj().T, ["M", "S"])
        assert densemath.trace_distance(coherent.matrix, deferred.matrix) > 1e-3


def test_measurement_records_deferral_and_added_entropy(rng):
    added = []
    for i in range(30):
        record = demon.demon_sample(i, 2.0, "measurement", rng)
        assert record.deferral_defect < 1e-10
        assert record.measurement_entropy >= -1e-12
        added.append(record.measurement_entropy)
        without_measurement_term = record.delta_s_s - (record.dephased_mutual_info_final - record.memory_entropy_final)
        assert without_measurement_term == pytest.approx(record.measurement_entropy, abs=1e-9)
    assert max(added) > 1e-3

    record = demon.demon_sample(0, 2.0, "unitary", rng)
    assert record.measurement_entropy == 0.0
    assert record.deferral_defect == 0.0
