"""Kinetic energies: values, symmetries, derivatives, exact conditionals."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from ghmc.errors import MetricDegeneracyError, ValidationError
from ghmc.kinetic import euclidean_quadratic, riemannian_quadratic, student_t
from ghmc.metric import GraphMetric
from ghmc.model import builtin_target


def _all_variants():
    banana = builtin_target("banana")
    graph = GraphMetric(banana)
    lam = np.array([[2.0, 0.3], [0.3, 1.0]])
    return [
        ("euclidean", euclidean_quadratic(lam)),
        ("graph-quadratic", riemannian_quadratic(graph)),
        ("student-t-const", student_t(lam, nu=4.0)),
        ("student-t-graph", student_t(graph, nu=4.0)),
    ]


def test_energy_identity_metric():
    kin = euclidean_quadratic(np.eye(2))
    assert kin.energy([0.0, 0.0], [3.0, 4.0]) == pytest.approx(12.5)


def test_energy_includes_the_normalizing_logdet():
    kin = euclidean_quadratic(np.diag([4.0, 1.0]))
    expected = 2.0 - 0.5 * math.log(4.0)
    assert kin.energy([0.0, 0.0], [1.0, 0.0]) == pytest.approx(expected, abs=1e-12)


def test_student_t_energy_at_zero_momentum():
    kin = student_t(np.eye(1), nu=1.0)
    assert kin.energy([0.0], [0.0]) == pytest.approx(0.0, abs=1e-15)


def test_momentum_gradient_examples():
    kin = euclidean_quadratic(np.eye(2))
    np.testing.assert_allclose(kin.grad_p([0.0, 0.0], [3.0, 4.0]), [3.0, 4.0])
    kin = euclidean_quadratic(np.diag([4.0, 1.0]))
    np.testing.assert_allclose(kin.grad_p([0.0, 0.0], [1.0, 1.0]), [4.0, 1.0])


@pytest.mark.parametrize("name,kin", _all_variants(), ids=lambda v: v if isinstance(v, str) else "")
def test_evenness_and_odd_gradient(name, kin):
    rng = np.random.default_rng(33)
    for _ in range(250):
        q = rng.normal(size=2) * 0.8
        p = rng.normal(size=2) * 2.0
        assert abs(kin.energy(q, -p) - kin.energy(q, p)) <= 1e-12
        np.testing.assert_allclose(kin.grad_p(q, -p), -kin.grad_p(q, p), atol=1e-12)


def test_constant_metric_has_no_position_force():
    kin = euclidean_quadratic(np.diag([4.0, 1.0]))
    np.testing.assert_array_equal(kin.grad_q([0.3, -0.2], [1.0, 2.0]), np.zeros(2))
    kin_t = student_t(np.diag([4.0, 1.0]), nu=3.0)
    np.testing.assert_array_equal(kin_t.grad_q([0.3, -0.2], [1.0, 2.0]), np.zeros(2))


def test_position_gradient_one_dimensional_values():
    model = builtin_target("std_gaussian", n=1)
    kin = riemannian_quadratic(GraphMetric(model))
    # at p = 0 only the log-determinant term acts: d/dq log(1+q^2)/2 = q/(1+q^2)
    assert kin.grad_q([1.0], [0.0])[0] == pytest.approx(0.5, abs=1e-14)

    # finite differences of the energy, rel err < 1e-5
    q, p = np.array([1.0]), np.array([1.0])
    h = 1e-5
    fd = (kin.energy(q + h, p) - kin.energy(q - h, p)) / (2 * h)
    assert abs(kin.grad_q(q, p)[0] - fd) / abs(fd) < 1e-5


@pytest.mark.parametrize("name,kin", _all_variants(), ids=lambda v: v if isinstance(v, str) else "")
def test_gradients_match_finite_differences(name, kin):
    rng = np.random.default_rng(17)
    h = 1e-6
    for _ in range(10):
        q = rng.normal(size=2) * 0.7
        p = rng.normal(size=2) * 1.5
        grad_p = kin.grad_p(q, p)
        grad_q = kin.grad_q(q, p)
        for i in range(2):
            dp = np.zeros(2)
            dp[i] = h
            fd_p = (kin.energy(q, p + dp) - kin.energy(q, p - dp)) / (2 * h)
            assert abs(grad_p[i] - fd_p) / max(1.0, abs(fd_p)) < 1e-5
            fd_q = (kin.energy(q + dp, p) - kin.energy(q - dp, p)) / (2 * h)
            assert abs(grad_q[i] - fd_q) / max(1.0, abs(fd_q)) < 1e-5


def test_momentum_draws_identity_covariance():
    kin = euclidean_quadratic(np.eye(2))
    rng = np.random.default_rng(2)
    n_draws = 50000
    draws = np.array([kin.sample_momentum(np.zeros(2), rng) for _ in range(n_draws)])
    cov = np.cov(draws, rowvar=False)
    assert np.max(np.abs(cov - np.eye(2))) < 0.05
    # zero mean within four standard errors
    assert np.max(np.abs(draws.mean(axis=0))) < 4.0 / math.sqrt(n_draws)


def test_momentum_draws_follow_the_inverse_metric():
    # T = p.Lam p/2, so the exact conditional has covariance Lam^{-1}:
    # for Lam = diag(4, 1) the variances are (1/4, 1)
    kin = euclidean_quadratic(np.diag([4.0, 1.0]))
    rng = np.random.default_rng(12)
    draws = np.array([kin.sample_momentum(np.zeros(2), rng) for _ in range(50000)])
    var = draws.var(axis=0)
    assert abs(var[0] - 0.25) / 0.25 < 0.05
    assert abs(var[1] - 1.0) < 0.05


def test_student_t_draws_scale_mixture_covariance():
    # t_nu with inverse scale Lam has covariance nu/(nu-2) Lam^{-1}
    kin = student_t(np.diag([4.0, 1.0]), nu=5.0)
    rng = np.random.default_rng(11)
    draws = np.array([kin.sample_momentum(np.zeros(2), rng) for _ in range(50000)])
    var = draws.var(axis=0)
    expect = (5.0 / 3.0) * np.array([0.25, 1.0])
    assert np.max(np.abs(var - expect) / expect) < 0.07


def test_momentum_draws_are_deterministic_for_a_seed():
    kin = euclidean_quadratic(np.diag([4.0, 1.0]))
    one = kin.sample_momentum(np.zeros(2), np.random.default_rng(99))
    two = kin.sample_momentum(np.zeros(2), np.random.default_rng(99))
    np.testing.assert_array_equal(one, two)


def _normalizer(kin, q):
    return quad(lambda p: math.exp(-kin.energy([q], [p])), -np.inf, np.inf)[0]


def test_conditional_normalizer_is_position_independent():
    model = builtin_target("std_gaussian", n=1)
    graph = GraphMetric(model)
    quad_kin = riemannian_quadratic(graph)
    values = [_normalizer(quad_kin, q) for q in (-2.0, -0.5, 0.0, 1.0, 3.0)]
    for val in values:
        assert abs(val - math.sqrt(2.0 * math.pi)) / val < 1e-6
    t_kin = student_t(graph, nu=3.0)
    t_values = [_normalizer(t_kin, q) for q in (-2.0, -0.5, 0.0, 1.0, 3.0)]
    for val in t_values:
        assert abs(val - t_values[0]) / t_values[0] < 1e-6


def test_non_spd_inverse_metric_is_rejected():
    with pytest.raises(MetricDegeneracyError):
        euclidean_quadratic(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_student_t_parameter_validation_and_default():
    with pytest.raises(ValidationError):
        student_t(np.eye(1), nu=0.0)
    assert student_t(np.eye(1)).nu == 5.0


def test_euclidean_requires_constant_field():
    from ghmc.errors import UsageError

    model = builtin_target("std_gaussian", n=1)
    with pytest.raises(UsageError):
        euclidean_quadratic(GraphMetric(model))


def test_graph_momentum_draw_matches_metric_covariance():
    model = builtin_target("funnel", n=2)
    kin = riemannian_quadratic(GraphMetric(model))
    q = np.array([0.5, -0.4])
    rng = np.random.default_rng(8)
    draws = np.array([kin.sample_momentum(q, rng) for _ in range(50000)])
    state = kin.field.state_at(q)
    target_cov = np.linalg.inv(state.lam)
    rel = np.max(np.abs(np.cov(draws, rowvar=False) - target_cov)) / np.max(np.abs(target_cov))
    assert rel < 0.05
