import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core import densemath
from core.errors import DimensionError
from models.quantum import DensityMatrix
from services import infomeasures
from services.states import classical_corr_state, product_state, pure_state, quantum_corr_state

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)
BELL = pure_state([1, 0, 0, 1], (2, 2), ("S", "M"))


def _random_state(seed, dims, labels, rank=None):
    rng = np.random.default_rng(seed)
    return DensityMatrix(densemath.random_density_matrix(int(np.prod(dims)), rng, rank), dims, labels)


def test_entropy_of_maximally_mixed_qubit():
    rho = DensityMatrix(np.eye(2) / 2, (2,), ("S",))
    assert infomeasures.vn_entropy(rho) == pytest.approx(np.log(2))


def test_bell_state_measures():
    assert infomeasures.vn_entropy(BELL) == pytest.approx(0.0, abs=1e-10)
    assert infomeasures.mutual_information(BELL) == pytest.approx(2 * np.log(2))
    assert infomeasures.conditional_entropy(BELL, "M") == pytest.approx(-np.log(2))


def test_product_state_has_no_mutual_information():
    assert infomeasures.mutual_information(product_state(0.3)) == pytest.approx(0.0, abs=1e-12)


def test_binary_entropy():
    assert infomeasures.binary_entropy(0.5) == pytest.approx(np.log(2))
    assert infomeasures.binary_entropy(1.0) == 0.0


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_strong_subadditivity(seed):
    rho = _random_state(seed, (2, 2, 2), ("S", "M", "R"))
    assert infomeasures.conditional_mutual_information(rho, "M", "R", "S") >= -1e-10


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_cmi_of_rank_deficient_states(seed):
    rho = _random_state(seed, (2, 2, 2), ("S", "M", "R"), rank=1)
    value = infomeasures.conditional_mutual_information(rho, "M", "R", "S")
    assert value >= -1e-10
    assert value <= 2 * np.log(2) + 1e-10


def test_cmi_requires_matching_parts():
    rho = _random_state(5, (2, 2, 2), ("S", "M", "R"))
    with pytest.raises(DimensionError):
        infomeasures.conditional_mutual_information(rho, "M", "X", "S")


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_dephasing_memory_cannot_raise_mutual_information(seed):
    rho = _random_state(seed, (2, 2), ("S", "M"))
    assert infomeasures.dephased_mutual_information(rho, "M") <= infomeasures.mutual_information(rho) + 1e-10
    assert infomeasures.dephased_mutual_information(rho, "M") >= -1e-10


def test_dephased_mutual_information_of_classical_state():
    rho = classical_corr_state(0.7, 0.3)
    assert infomeasures.dephased_mutual_information(rho) == pytest.approx(infomeasures.mutual_information(rho))


def test_dephased_mutual_information_of_pure_entangled_state():
    p = 0.4
    rho = quantum_corr_state(p, 0.0)
    assert infomeasures.dephased_mutual_information(rho) == pytest.approx(infomeasures.binary_entropy(p))


def test_memory_dephasing_keeps_system_coherence():
    rho = pure_state([1, 0, 1, 0], (2, 2), ("S", "M"))
    assert np.allclose(infomeasures.memory_dephased(rho).matrix, rho.matrix)
    assert infomeasures.dephased_mutual_information(rho) == pytest.approx(0.0, abs=1e-10)
    bell = infomeasures.memory_dephased(BELL)
    assert np.allclose(bell.matrix, np.diag([0.5, 0, 0, 0.5]))
    assert bell.labels == BELL.labels


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_coherence_is_nonnegative(seed):
    rng = np.random.default_rng(seed)
    rho = DensityMatrix(densemath.random_density_matrix(4, rng), (2, 2), ("S", "M"))
    assert infomeasures.coherence_J(rho, densemath.haar_unitary(4, rng)) >= -1e-10


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_relative_entropy_is_nonnegative(seed):
    rho = _random_state(seed, (2,), ("S",))
    sigma = _random_state(seed + 1, (2,), ("S",))
    assert infomeasures.relative_entropy(rho, sigma) >= -1e-10
    assert infomeasures.relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-10)


def test_relative_entropy_outside_support_is_infinite():
    rho = DensityMatrix(np.eye(2) / 2, (2,), ("S",))
    sigma = DensityMatrix(np.diag([1.0, 0.0]).astype(complex), (2,), ("S",))
    assert infomeasures.relative_entropy(rho, sigma) == float("inf")


def test_log_operator_clips_zero_eigenvalues():
    rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex), (2,), ("S",))
    log_rho = infomeasures.log_operator(rho, floor=1e-12)
    assert log_rho[1, 1].real == pytest.approx(np.log(1e-12))
    assert abs(log_rho[0, 0]) < 1e-12
