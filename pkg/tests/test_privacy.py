import math

import numpy as np
import pytest

from dpsgda.core import ContractViolation
from dpsgda.privacy import (
    MechanismParams,
    NoiseScales,
    NonPrivateMechanism,
    PrivacyBudget,
    calibrate_noise,
    default_batch_size,
    epsilon_for,
    moment_bound,
    validity_range,
    verify_budget,
)

SMALL_EPS = MechanismParams(n=10_000, m=500, T=100, G_w=1.0, G_v=1.0)
SMALL_EPS_BUDGET = PrivacyBudget(1.0, 1e-8)


def test_calibrate_example(frozen):
    s = calibrate_noise(SMALL_EPS, PrivacyBudget(1.0, 1e-6))
    assert s.sigma_w == pytest.approx(frozen["closed_form"]["calibrate_sigma"], rel=1e-14)
    assert s.sigma_w == s.sigma_v
    assert s.sigma_w == pytest.approx(0.0297354, rel=1e-6)


def test_calibrate_homogeneity():
    b = PrivacyBudget(0.5, 1e-5)
    base = calibrate_noise(MechanismParams(1000, 10, 50, 1.0, 3.0), b)
    g2 = calibrate_noise(MechanismParams(1000, 10, 50, 2.0, 3.0), b)
    t4 = calibrate_noise(MechanismParams(1000, 10, 200, 1.0, 3.0), b)
    n2 = calibrate_noise(MechanismParams(2000, 10, 50, 1.0, 3.0), b)
    e2 = calibrate_noise(MechanismParams(1000, 10, 50, 1.0, 3.0), PrivacyBudget(1.0, 1e-5))
    assert g2.sigma_w == pytest.approx(2 * base.sigma_w, rel=1e-15) and g2.sigma_v == base.sigma_v
    assert t4.sigma_w == pytest.approx(2 * base.sigma_w, rel=1e-15)
    assert n2.sigma_v == pytest.approx(base.sigma_v / 2, rel=1e-15)
    assert e2.sigma_v == pytest.approx(base.sigma_v / 2, rel=1e-15)
    d = calibrate_noise(MechanismParams(1000, 10, 50, 1.0, 3.0), PrivacyBudget(0.5, 1e-10))
    assert d.sigma_w / base.sigma_w == pytest.approx(math.sqrt(math.log(1e10) / math.log(1e5)), rel=1e-14)


def test_invalid_inputs():
    with pytest.raises(ContractViolation):
        PrivacyBudget(0.0, 1e-5)
    with pytest.raises(ContractViolation):
        PrivacyBudget(1.0, 1.0)
    with pytest.raises(ContractViolation):
        MechanismParams(10, 11, 1, 1.0, 1.0)
    with pytest.raises(ContractViolation):
        calibrate_noise(SMALL_EPS, SMALL_EPS_BUDGET, c_w=0.0)


def test_default_batch_size():
    assert default_batch_size(10_000, 1.0, 100) == 500
    assert default_batch_size(10, 0.001, 10**6) == 1
    assert default_batch_size(100, 1.0, 1) == 50
    # clamped to n
    assert default_batch_size(10, 1.0, 1) == 5


def test_default_batch_size_warns_outside_regime(caplog):
    default_batch_size(100, 5.0, 10)
    assert "epsilon <= 1" in caplog.text


def test_moment_bound_examples(frozen):
    # with m = n = 1 the noise multiplier equals sigma / (2G)
    p = MechanismParams(1, 1, 1, 1.0, 1.0)
    s = NoiseScales(2.0, 2.0)
    assert moment_bound(1.0, p, s) == pytest.approx(2.0, rel=1e-15)
    assert moment_bound(2.0, p, s) == 4 * moment_bound(1.0, p, s)
    sc = calibrate_noise(SMALL_EPS, PrivacyBudget(1.0, 1e-6))
    assert moment_bound(4.0, SMALL_EPS, sc) == pytest.approx(frozen["closed_form"]["calibrate_alpha_at_4"], rel=1e-12)


def test_zero_noise_is_non_private():
    with pytest.raises(NonPrivateMechanism):
        moment_bound(1.0, SMALL_EPS, NoiseScales(0.0, 1.0))
    with pytest.raises(NonPrivateMechanism):
        verify_budget(SMALL_EPS, NoiseScales.non_private(), SMALL_EPS_BUDGET)


def test_validity_range_examples(frozen):
    m = 10
    # multiplier z = m sigma / (2G) = 1 and n = e m: upper end ln(e) = 1
    p = MechanismParams(n=int(round(math.e * 1e6)), m=10**6, T=1, G_w=1.0, G_v=1.0)
    s = NoiseScales(2.0 / 10**6, 2.0 / 10**6)
    lo, hi = validity_range(p, s)
    assert lo == 0.0 and hi == pytest.approx(1.0, rel=1e-6)
    # log argument <= 1: empty
    assert validity_range(MechanismParams(100, m, 1, 1.0, 1.0), NoiseScales(50.0, 50.0)) is None
    sc = calibrate_noise(SMALL_EPS, PrivacyBudget(1.0, 1e-6))
    assert validity_range(SMALL_EPS, sc)[1] == pytest.approx(frozen["closed_form"]["calibrate_interval_upper"], rel=1e-12)


def test_epsilon_for_small_eps_matches_oracle(frozen):
    oracle = frozen["closed_form"]["small_eps"]
    s = calibrate_noise(SMALL_EPS, SMALL_EPS_BUDGET)
    eps = epsilon_for(SMALL_EPS, s, 1e-8)
    assert eps <= 1.0
    assert abs(eps - oracle["epsilon"]) / oracle["epsilon"] <= 1e-4
    assert eps == pytest.approx(0.7071067811865578, rel=1e-9)  # regression pin


def test_epsilon_unbounded_when_range_empty():
    assert epsilon_for(MechanismParams(100, 10, 1, 1.0, 1.0), NoiseScales(50.0, 50.0), 1e-5) == math.inf


def test_epsilon_decreases_with_noise():
    vals = [epsilon_for(SMALL_EPS, NoiseScales(s, s), 1e-8) for s in (0.03, 0.04, 0.05)]
    assert vals[0] > vals[1] > vals[2]


def test_epsilon_near_validity_edge():
    # as q*z -> 1 the admissible lambda range collapses: the bound loosens, then
    # becomes unbounded (documented limitation of the log-moment lemma)
    tight = epsilon_for(SMALL_EPS, NoiseScales(0.06, 0.06), 1e-8)
    edge = epsilon_for(SMALL_EPS, NoiseScales(0.079, 0.079), 1e-8)
    assert edge > tight
    assert epsilon_for(SMALL_EPS, NoiseScales(0.08, 0.08), 1e-8) == math.inf


def test_epsilon_monotone_grids():
    s = NoiseScales(0.05, 0.07)
    by_T = [epsilon_for(MechanismParams(10_000, 500, T, 1.0, 1.0), s, 1e-8) for T in (10, 50, 100, 200)]
    assert all(a <= b for a, b in zip(by_T, by_T[1:]))
    # noise grids stay where the lambda range does not bind
    by_sw = [epsilon_for(SMALL_EPS, NoiseScales(sw, 0.04), 1e-8) for sw in (0.03, 0.035, 0.04, 0.045)]
    assert all(a >= b for a, b in zip(by_sw, by_sw[1:]))
    by_sv = [epsilon_for(SMALL_EPS, NoiseScales(0.04, sv), 1e-8) for sv in (0.03, 0.035, 0.04, 0.045)]
    assert all(a >= b for a, b in zip(by_sv, by_sv[1:]))
    # interior optimum: epsilon does not depend on m (see the decisions ledger)
    s = NoiseScales(0.035, 0.035)
    by_m = [epsilon_for(MechanismParams(10_000, m, 100, 1.0, 1.0), s, 1e-8) for m in (400, 450, 500)]
    assert all(a <= b * (1 + 1e-9) for a, b in zip(by_m, by_m[1:]))
    # once the range boundary binds, a smaller batch gives a larger bound
    small = epsilon_for(MechanismParams(10_000, 300, 100, 1.0, 1.0), s, 1e-8)
    assert small > by_m[0]


def test_verify_budget_examples(frozen):
    s = calibrate_noise(SMALL_EPS, SMALL_EPS_BUDGET)
    rep = verify_budget(SMALL_EPS, s, SMALL_EPS_BUDGET)
    assert rep.verified
    assert rep.interval[1] == pytest.approx(frozen["closed_form"]["small_eps"]["upper"], rel=1e-12)
    assert 0 < rep.lam <= rep.interval[1]
    halved = NoiseScales(s.sigma_w / 2, s.sigma_v / 2)
    rep2 = verify_budget(SMALL_EPS, halved, SMALL_EPS_BUDGET)
    assert not rep2.verified
    assert rep2.epsilon_achieved == pytest.approx(frozen["closed_form"]["small_eps_halved"]["epsilon"], rel=1e-4)
    d = rep.as_dict()
    assert d["verified"] is True and d["lambda_interval"][0] == 0.0 and d["notes"]


@pytest.mark.parametrize("n", [1_000, 10_000, 100_000])
@pytest.mark.parametrize("T", [100, 1_000, 10_000])
def test_calibration_verifies_in_small_eps_regime(n, T):
    budget = PrivacyBudget(1.0, 1.0 / n**2)
    m = default_batch_size(n, 1.0, T)
    p = MechanismParams(n, m, T, 1.0, 1.0)
    assert verify_budget(p, calibrate_noise(p, budget), budget).verified


def test_per_variable_scales_are_independent():
    p = MechanismParams(10_000, 500, 100, 1.0, 0.1)
    s = calibrate_noise(p, SMALL_EPS_BUDGET)
    assert s.sigma_v == pytest.approx(0.1 * s.sigma_w, rel=1e-15)
    assert verify_budget(p, s, SMALL_EPS_BUDGET).verified
    np.testing.assert_allclose(verify_budget(p, s, SMALL_EPS_BUDGET).noise_multipliers, [8.583864105157389] * 2, rtol=1e-12)


def test_small_eps_choice_needs_enough_iterations():
    # with m = n sqrt(eps/(4T)) the sampled multiplier product is q z = sqrt(log(1/delta)/T),
    # so T <= log(1/delta) leaves no admissible lambda
    n, T = 100_000, 10
    budget = PrivacyBudget(1.0, 1.0 / n**2)
    p = MechanismParams(n, default_batch_size(n, 1.0, T), T, 1.0, 1.0)
    assert epsilon_for(p, calibrate_noise(p, budget), budget.delta) == math.inf
