import pytest

from models.configs import VerifyConfig
from services import verification


@pytest.mark.parametrize("suite", verification.SUITES)
def test_suite_passes(suite):
    config = VerifyConfig(instances=30, ift_instances=10, seed=11)
    results = verification.run_verification(config, [suite], progress=False)
    assert results
    failed = {r.name: r.worst_defect for r in results if not r.passed}
    assert not failed


def test_sign_flip_is_caught():
    config = VerifyConfig(ift_instances=3, seed=11, inject_sign_flip=True)
    results = verification.run_verification(config, ["ift"], progress=False)
    assert not any(r.passed for r in results)


def test_scheme_selection():
    global_only = verification.ift_defects(verification.reference_process(), "global")
    assert set(global_only) == {"sigma_s_given_m_global"}
    local_only = verification.ift_defects(verification.reference_process(), "local")
    assert set(local_only) == {
        "sigma_s_given_m_local", "sigma_s", "sigma_i_local", "sigma_s_given_m_local|b", "sigma_i_local|sr",
    }


def test_suites_are_reproducible():
    config = VerifyConfig(instances=5, ift_instances=3, seed=4)
    first = verification.run_verification(config, ["hierarchy", "ift"], progress=False)
    second = verification.run_verification(config, ["ift", "hierarchy"], progress=False)
    by_name = {r.name: r.worst_defect for r in second}
    assert all(by_name[r.name] == r.worst_defect for r in first)


def test_check_records_instances():
    result = verification._check("demo", [0.0, 2e-9], 1e-9, note="x")
    assert result.instances == 2
    assert not result.passed
    assert result.details == {"note": "x"}


def test_new_checks_are_reported():
    config = VerifyConfig(instances=5, ift_instances=2, seed=3)
    results = verification.run_verification(config, ["ift", "demon", "collision"], progress=False)
    by_name = {r.name: r for r in results}
    for name in ("ift_degenerate_basis", "measurement_deferral", "measurement_entropy_nonnegative", "collision_channel"):
        assert by_name[name].passed
    assert by_name["collision_channel"].instances == 5
    assert by_name["measurement_deferral"].instances == 2 * 2


def test_degenerate_basis_process_is_rotated(rng):
    process = verification.degenerate_basis_process(rng)
    default = verification.reference_process()
    assert process.forward_global.probabilities != default.forward_global.probabilities
    assert max(verification.ift_defects(process).values()) < 1e-10
