import numpy as np
import pytest

from models.configs import CorrelationFamily, ProtocolConfig
from models.quantum import QubitHamiltonian
from services.states import correlated_state, thermal_state


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def reference_sm():
    """Classical correlations eps_c = 0.5 at beta*E_S = 1"""
    return correlated_state(CorrelationFamily(kind="classical", beta_times_e=1.0, noise=0.5))


@pytest.fixture
def reference_reservoir():
    return thermal_state(QubitHamiltonian(excited_energy=0.1), 1.0)


@pytest.fixture
def protocol_config():
    return ProtocolConfig()


@pytest.fixture
def short_protocol():
    """Ten quench steps, fast enough for per-test runs"""
    return ProtocolConfig(delta_e=0.09, g=0.5)
