"""Transition kernel, chain driver, and diagnostics."""

import math

import numpy as np
import pytest

from ghmc.errors import UsageError
from ghmc.integrator import IntegratorConfig
from ghmc.kinetic import euclidean_quadratic, riemannian_quadratic
from ghmc.metric import GraphMetric
from ghmc.model import TargetModel, builtin_target
from ghmc.sampler import ChainConfig, effective_sample_size, hmc_transition, run_chain


def _config(seed=1, num_samples=100, warmup=0, eps=0.1, steps=20, jitter=False, **extra):
    return ChainConfig(
        seed=seed,
        num_samples=num_samples,
        warmup=warmup,
        integrator=IntegratorConfig(eps, steps, **extra),
        jitter_steps=jitter,
    )


def test_vanishing_step_size_always_accepts():
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    cfg = _config(eps=1e-6, steps=1)
    rng = np.random.default_rng(0)
    for _ in range(50):
        _, accepted, delta_h = hmc_transition(model, kin, np.array([0.7]), cfg, rng)
        assert accepted
        assert abs(delta_h) < 1e-9


def test_moderate_step_acceptance_rate():
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    res = run_chain(model, kin, _config(seed=2, num_samples=10000, eps=0.1, steps=20))
    assert res.accept_rate > 0.95


def test_huge_step_rejects_without_crashing():
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    res = run_chain(model, kin, _config(seed=3, num_samples=200, eps=10.0, steps=20))
    assert res.accept_rate < 0.05
    assert np.all(np.isfinite(res.samples))


def test_chains_are_bitwise_reproducible():
    model = builtin_target("std_gaussian", n=2)
    kin = euclidean_quadratic(np.eye(2))
    cfg = _config(seed=11, num_samples=500, warmup=50, jitter=True)
    one = run_chain(model, kin, cfg)
    two = run_chain(model, kin, cfg)
    np.testing.assert_array_equal(one.samples, two.samples)
    np.testing.assert_array_equal(one.delta_h, two.delta_h)


def test_potential_constant_shift_changes_nothing():
    base = builtin_target("std_gaussian", n=1)
    shifted = TargetModel(
        n=1,
        potential=lambda q: base.potential(q) + 7.25,
        gradient=base.gradient,
        hessian=base.hessian,
        name="shifted",
        initial_point=np.zeros(1),
    )
    kin = euclidean_quadratic(np.eye(1))
    cfg = _config(seed=13, num_samples=1000, jitter=True)
    res_base = run_chain(base, kin, cfg)
    res_shifted = run_chain(shifted, kin, cfg)
    np.testing.assert_array_equal(res_base.samples, res_shifted.samples)
    np.testing.assert_array_equal(res_base.accepted, res_shifted.accepted)


def test_divergent_transitions_reject_and_are_counted():
    banana = builtin_target("banana")
    kin = euclidean_quadratic(np.eye(2))
    cfg = _config(seed=5, num_samples=50, eps=2.0, steps=20)
    res = run_chain(banana, kin, cfg)
    assert res.divergence_count == 50
    assert np.all(res.delta_h == math.inf)
    assert not np.any(res.accepted)
    # the chain never moved off its initial point
    np.testing.assert_array_equal(res.samples, np.tile(banana.initial_point, (50, 1)))


def test_accept_rate_matches_flags():
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    res = run_chain(model, kin, _config(seed=4, num_samples=300, eps=1.2, steps=10))
    assert res.accept_rate == pytest.approx(np.mean(res.accepted))
    assert 0.0 < res.accept_rate < 1.0


def test_constrained_chain_stays_feasible():
    model = builtin_target("halfspace_gaussian")
    kin = euclidean_quadratic(np.eye(1))
    res = run_chain(model, kin, _config(seed=6, num_samples=2000, warmup=50, eps=0.15, steps=10, jitter=True))
    assert np.all(res.samples > 0.0)


def test_graph_metric_chain_samples_the_target():
    model = builtin_target("std_gaussian", n=1)
    kin = riemannian_quadratic(GraphMetric(model))
    res = run_chain(
        model, kin, _config(seed=21, num_samples=4000, warmup=100, eps=0.35, steps=6, jitter=True, fp_tol=1e-12)
    )
    assert res.divergence_count == 0
    assert abs(res.mean[0]) < 0.08
    assert abs(res.cov[0, 0] - 1.0) < 0.12


def test_missing_initial_point_is_a_usage_error():
    bare = TargetModel(n=1, potential=lambda q: 0.5 * float(q @ q), gradient=lambda q: q.copy())
    kin = euclidean_quadratic(np.eye(1))
    with pytest.raises(UsageError):
        run_chain(bare, kin, _config())
    res = run_chain(bare, kin, _config(num_samples=120), initial=np.array([0.3]))
    assert res.samples.shape == (120, 1)


def test_infeasible_initial_point_is_a_usage_error():
    model = builtin_target("halfspace_gaussian")
    kin = euclidean_quadratic(np.eye(1))
    with pytest.raises(UsageError):
        run_chain(model, kin, _config(), initial=np.array([-1.0]))


def test_warmup_is_discarded():
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    res = run_chain(model, kin, _config(seed=9, num_samples=150, warmup=75))
    assert res.samples.shape == (150, 1)
    assert res.accepted.shape == (150,)


def test_stationarity_of_one_transition():
    # chains started at exact draws stay distributed like the target
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    cfg = _config(num_samples=1, eps=0.1, steps=20)
    rng = np.random.default_rng(77)
    n_chains = 4000
    start = rng.standard_normal(n_chains)
    out = np.empty(n_chains)
    for i in range(n_chains):
        q, _, _ = hmc_transition(model, kin, np.array([start[i]]), cfg, rng)
        out[i] = q[0]
    assert abs(out.mean()) <= 4.0 / math.sqrt(n_chains)
    assert abs(out.var(ddof=1) - 1.0) <= 4.0 * math.sqrt(2.0 / n_chains)


def test_jitter_defeats_the_periodicity_trap():
    # step * num_steps near pi locks an unjittered harmonic chain into a cycle
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    n = 4000
    res = run_chain(
        model,
        kin,
        _config(seed=8, num_samples=n, warmup=100, eps=math.pi / 20.0, steps=20, jitter=True),
    )
    assert res.ess[0] > 0.05 * n
    assert abs(res.mean[0]) < 0.1


def test_ess_iid_band():
    rng = np.random.default_rng(0)
    ess = effective_sample_size(rng.standard_normal(10000))
    assert 8000 <= ess <= 12000


def test_ess_ar1_band():
    rng = np.random.default_rng(1)
    n, phi = 10000, 0.9
    x = np.empty(n)
    x[0] = rng.standard_normal()
    innov = math.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + innov * rng.standard_normal()
    ess = effective_sample_size(x)
    assert 350 <= ess <= 750  # analytic value n(1-phi)/(1+phi) ~ 526


def test_ess_constant_series_convention():
    assert effective_sample_size(np.full(500, 3.14)) == 500.0


def test_ess_needs_enough_samples():
    with pytest.raises(UsageError):
        effective_sample_size(np.arange(99))


def test_chain_moment_diagnostics_match_samples():
    model = builtin_target("std_gaussian", n=2)
    kin = euclidean_quadratic(np.eye(2))
    res = run_chain(model, kin, _config(seed=30, num_samples=500, eps=0.3, steps=8, jitter=True))
    np.testing.assert_allclose(res.mean, res.samples.mean(axis=0))
    np.testing.assert_allclose(res.cov, np.cov(res.samples, rowvar=False))
    assert res.ess.shape == (2,)
