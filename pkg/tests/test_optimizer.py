import math

import numpy as np
import pytest

from dpsgda.core import Ball, ContractViolation, RngStream
from dpsgda.optimizer import (
    Constant,
    DivergenceError,
    InverseTime,
    PowerTwoThirds,
    SgdaConfig,
    replay,
    run_dpsgda,
    schedule_cc_nonsmooth,
    schedule_cc_smooth,
    schedule_plsc_steps,
    step,
)
from dpsgda.privacy import NoiseScales
from dpsgda.problems import BilinearInstance, QuadraticGame, make_synthetic, saddle_point


def cfg(T, m=1, eta=0.1, **kw):
    return SgdaConfig(T=T, m=m, schedule_w=Constant(eta), schedule_v=Constant(eta), **kw)


def test_one_hand_computed_step():
    prob = BilinearInstance([[[1.0]]], [[0.0]], [[0.0]])
    res = run_dpsgda(prob, cfg(1, output="last"), RngStream(0), w0=[1.0], v0=[1.0])
    assert res.output_w[0] == pytest.approx(0.9, abs=1e-15)
    assert res.output_v[0] == pytest.approx(1.1, abs=1e-15)


def test_zero_gradient_fixed_point():
    prob = BilinearInstance(np.zeros((4, 2, 3)), np.zeros((4, 2)), np.zeros((4, 3)))
    w0, v0 = np.array([0.5, -1.0]), np.array([2.0, 0.0, 1.0])
    res = run_dpsgda(prob, cfg(50, m=2), RngStream(3), w0=w0, v0=v0)
    assert np.array_equal(res.output_w, w0) and np.array_equal(res.output_v, v0)
    assert np.array_equal(res.last_w, w0)


def test_full_batch_converges_to_saddle():
    prob = make_synthetic("bilinear", 30, 5, 5, seed=4)
    w_star, v_star = saddle_point(prob)
    res = run_dpsgda(prob, cfg(5000, m=30, eta=0.1, output="last", full_batch=True), RngStream(0))
    dist = np.linalg.norm(np.concatenate([res.output_w - w_star, res.output_v - v_star]))
    assert dist <= 1e-4


def test_full_batch_is_independent_of_seed():
    prob = make_synthetic("bilinear", 20, 3, 3, seed=1)
    a = run_dpsgda(prob, cfg(200, m=20, full_batch=True), RngStream(1))
    b = run_dpsgda(prob, cfg(200, m=20, full_batch=True), RngStream(99))
    assert np.array_equal(a.output_w, b.output_w) and np.array_equal(a.output_v, b.output_v)
    with pytest.raises(ContractViolation):
        run_dpsgda(prob, cfg(5, m=10, full_batch=True), RngStream(0))


# -- schedules ---------------------------------------------------------------


def test_cc_smooth_examples(frozen):
    T, s = schedule_cc_smooth(1024, 4, 1.0, 1e-6, 1.0)
    assert T == 1024 and s.eta == pytest.approx(1 / 32, rel=1e-15)
    assert s.eta == pytest.approx(frozen["closed_form"]["cc_smooth_eta"], rel=1e-15)
    _, s = schedule_cc_smooth(1024, 4, 0.01, 1e-6, 1.0)
    assert s.eta == pytest.approx(frozen["closed_form"]["cc_smooth_eta_eps001"], rel=1e-13)
    assert 1 / s.eta == pytest.approx(743.4, rel=1e-4)
    T2, s2 = schedule_cc_smooth(1024, 4, 1.0, 1e-6, 1.0, scale=2.0)
    assert T2 == 2048 and s2.eta == 2 * (1 / 32)
    _, non_private = schedule_cc_smooth(1024, 4, math.inf, 1e-6, 1.0)
    assert non_private.eta == 1 / 32


def test_cc_nonsmooth_examples(frozen):
    T, s = schedule_cc_nonsmooth(100, 4, 1.0, 1e-6)
    assert T == 10_000 and s.eta == pytest.approx(1e-3, rel=1e-15)
    assert s.eta == pytest.approx(frozen["closed_form"]["cc_nonsmooth_eta"], rel=1e-15)
    assert schedule_cc_nonsmooth(200, 4, 1.0, 1e-6)[0] == 4 * T
    assert schedule_cc_nonsmooth(100, 6, 1.0, 1e-6)[1].eta == s.eta


def test_plsc_steps_examples(frozen):
    sw, sv = schedule_plsc_steps(1.0, 1.0, 1.0)
    for t in (1, 2, 3, 4, 8, 100):
        assert step(sw, t) == pytest.approx(min(2 / t, 0.5), rel=1e-15)
        assert step(sv, t) == pytest.approx(min(2 / t ** (2 / 3), 1.0), rel=1e-15)
    assert step(PowerTwoThirds(2.0), 8) == pytest.approx(0.5, rel=1e-15)
    _, sv = schedule_plsc_steps(1.0, 1.0, 2.0)
    assert sv.c == pytest.approx(frozen["closed_form"]["plsc_v_prefactor_kappa2"], rel=1e-15)
    assert sv.c == pytest.approx(11.3137, rel=1e-5)


def test_schedule_validation():
    for bad in (lambda: Constant(0.0), lambda: InverseTime(1.0, 0.0), lambda: PowerTwoThirds(-1.0)):
        with pytest.raises(ContractViolation):
            bad()
    with pytest.raises(ContractViolation):
        step(Constant(1.0), 0)
    with pytest.raises(ContractViolation):
        schedule_plsc_steps(0.0, 1.0, 1.0)


# -- replay and randomness ---------------------------------------------------


NOISY = NoiseScales(0.3, 0.2)


def test_replay_is_exact():
    prob = make_synthetic("bilinear", 40, 3, 4, seed=2, radius_w=2.0, radius_v=2.0)
    c = cfg(300, m=4, seed=11, noise=NOISY)
    a, b = replay(prob, c), replay(prob, c)
    assert np.array_equal(a.output_w, b.output_w) and np.array_equal(a.output_v, b.output_v)
    assert [r.value for r in a.trace] == [r.value for r in b.trace]


def test_different_seeds_differ():
    prob = make_synthetic("bilinear", 40, 3, 4, seed=2)
    a = replay(prob, cfg(50, m=4, seed=1, noise=NOISY))
    b = replay(prob, cfg(50, m=4, seed=2, noise=NOISY))
    assert not np.array_equal(a.output_w, b.output_w)


def test_record_every_is_observational():
    prob = make_synthetic("bilinear", 40, 3, 4, seed=2)
    runs = [replay(prob, cfg(2500, m=3, seed=5, noise=NOISY, record_every=k)) for k in (1, 7, 2500)]
    for r in runs[1:]:
        assert np.array_equal(r.output_w, runs[0].output_w) and np.array_equal(r.output_v, runs[0].output_v)
    assert [len(r.trace) for r in runs] == [2500, 358, 1]
    ts = [rec.t for rec in runs[1].trace]
    assert all(a < b for a, b in zip(ts, ts[1:])) and ts[-1] == 2500


def test_average_is_mean_of_recorded_iterates():
    prob = make_synthetic("bilinear", 30, 2, 3, seed=6, radius_w=1.0, radius_v=1.0)
    res = replay(prob, cfg(400, m=2, seed=3, noise=NOISY, record_every=1))
    np.testing.assert_array_equal(res.output_w, np.sum([r.w for r in res.trace], axis=0) / 400)
    np.testing.assert_array_equal(res.output_v, np.sum([r.v for r in res.trace], axis=0) / 400)
    last = replay(prob, cfg(400, m=2, seed=3, noise=NOISY, output="last"))
    assert np.array_equal(last.output_w, res.trace[-1].w)


def test_iterates_stay_in_domains():
    prob = make_synthetic("bilinear", 30, 3, 3, seed=6, radius_w=0.5, radius_v=0.3)
    res = replay(prob, cfg(500, m=2, eta=1.0, seed=8, noise=NoiseScales(5.0, 5.0), record_every=1))
    for rec in res.trace:
        assert prob.domain_w.contains(rec.w) and prob.domain_v.contains(rec.v)
    assert prob.domain_w.contains(res.output_w) and prob.domain_v.contains(res.output_v)


class CountingGame(QuadraticGame):
    """Zero game that records every sampled index (generic code path)."""

    def __init__(self, n):
        super().__init__(np.zeros((n, 1, 1)), np.zeros((n, 1)), np.zeros((n, 1)))
        self.counts = np.zeros(n, dtype=np.int64)

    def kernel_spec(self):
        return None

    def _batch_mean_gradient(self, w, v, idx):
        np.add.at(self.counts, idx, 1)
        return super()._batch_mean_gradient(w, v, idx)


def test_batch_sampling_is_uniform_with_replacement():
    n, m, T = 10, 10, 10_000
    prob = CountingGame(n)
    run_dpsgda(prob, cfg(T, m=m, record_every=T), RngStream(2024))
    counts = prob.counts
    p = 1 / n
    expected = m * T * p
    sd = math.sqrt(m * T * p * (1 - p))
    assert counts.sum() == m * T
    assert np.all(np.abs(counts - expected) <= 5 * sd)


def test_duplicates_occur_within_batches():
    prob = CountingGame(3)
    seen = []
    orig = prob._batch_mean_gradient

    def spy(w, v, idx):
        seen.append(len(set(idx.tolist())) < len(idx))
        return orig(w, v, idx)

    prob._batch_mean_gradient = spy
    run_dpsgda(prob, cfg(50, m=3), RngStream(0))
    assert any(seen)


def test_divergence_aborts_with_diagnostic():
    prob = BilinearInstance([[[1.0]]], [[0.0]], [[0.0]], 1.0, 1.0)
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as exc:
        run_dpsgda(prob, cfg(500, eta=1e40), RngStream(0), w0=[1.0], v0=[1.0])
    assert 1 <= exc.value.t <= 500
    assert "iteration" in str(exc.value)


def test_config_validation():
    with pytest.raises(ContractViolation):
        cfg(0)
    with pytest.raises(ContractViolation):
        cfg(10, record_every=11)
    with pytest.raises(ContractViolation):
        cfg(10, output="best")
    prob = make_synthetic("bilinear", 5, 2, 2, seed=0)
    with pytest.raises(ContractViolation):
        run_dpsgda(prob, cfg(3, m=6), RngStream(0))
    with pytest.raises(ContractViolation):
        run_dpsgda(prob, cfg(3), RngStream(0), w0=[0.0, 0.0, 0.0], v0=[0.0, 0.0])


def test_initial_point_is_projected():
    prob = make_synthetic("bilinear", 5, 2, 2, seed=0, radius_w=1.0, radius_v=1.0)
    res = run_dpsgda(prob, cfg(1, record_every=1), RngStream(0), w0=[3.0, 4.0], v0=[0.0, 0.0])
    assert isinstance(prob.domain_w, Ball)
    assert np.linalg.norm(res.trace[0].w) <= 1.0 + 1e-12
