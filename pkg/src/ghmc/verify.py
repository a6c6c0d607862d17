"""Executable verification of the engine's geometric invariants.

Each check exercises one contract against an independent oracle: round-trip
integration for reversibility, finite-difference Jacobians for volume
preservation, dense linear algebra for the rank-1 inverse and its
log-determinant, finite-difference connection coefficients for the closed
form, exact moments for the samplers, and wall-clock regressions for the
O(n^2) cost target.  The CLI ``verify`` command prints these as a table; the
acceptance test suite asserts them at their contractual sizes.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from .integrator import (
    IntegratorConfig,
    PhaseState,
    generalized_leapfrog_step,
    integrate,
    leapfrog_step,
    reflect_momentum,
    volume_check,
)
from .kinetic import euclidean_quadratic, riemannian_quadratic, student_t
from .metric import BackgroundMetric, GraphMetric, metric_inverse
from .model import TargetModel, builtin_target, potential_grad
from .sampler import ChainConfig, hmc_transition, run_chain

__all__ = ["CheckResult", "run_checks", "QUICK_CHECKS", "FULL_CHECKS"]


@dataclass
class CheckResult:
    """Outcome of one verification check."""

    name: str
    passed: bool
    measured: float
    requirement: str
    detail: str
    seconds: float


def _finish(name, passed, measured, requirement, detail, t0):
    return CheckResult(
        name=name,
        passed=bool(passed),
        measured=float(measured),
        requirement=requirement,
        detail=detail,
        seconds=time.perf_counter() - t0,
    )


def _roundtrip_explicit(model, kin, q0, p0, eps, num_steps):
    q, p = q0.copy(), p0.copy()
    for _ in range(num_steps):
        q, p = leapfrog_step(model, kin, q, p, eps)
    p = -p
    for _ in range(num_steps):
        q, p = leapfrog_step(model, kin, q, p, eps)
    p = -p
    return max(float(np.max(np.abs(q - q0))), float(np.max(np.abs(p - p0))))


def _roundtrip_generalized(model, kin, q0, p0, eps, num_steps, fp_tol):
    q, p = q0.copy(), p0.copy()
    for _ in range(num_steps):
        q, p = generalized_leapfrog_step(model, kin, q, p, eps, fp_tol, 200)
    p = -p
    for _ in range(num_steps):
        q, p = generalized_leapfrog_step(model, kin, q, p, eps, fp_tol, 200)
    p = -p
    return max(float(np.max(np.abs(q - q0))), float(np.max(np.abs(p - p0))))


def _catalog_suite():
    return [
        builtin_target("std_gaussian", n=2),
        builtin_target("mvn", mean=[0.0, 0.0], cov=[[1.0, 0.5], [0.5, 1.0]]),
        builtin_target("banana"),
        builtin_target("funnel", n=2),
    ]


def check_reversibility():
    """Round-trip error of both integrators on the unconstrained catalog.

    Explicit rows use a Euclidean kinetic.  Implicit rows use the graph-metric
    kinetic except on the banana target, whose graph flow is too stiff for a
    contractive fixed point at this step size; there the implicit stepper runs
    with the constant metric (its equations degrade to the explicit ones).
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_explicit = 0.0
    worst_implicit = 0.0
    detail = []
    for model in _catalog_suite():
        if model.name == "banana":
            # inside the leapfrog stability region for this step size: the
            # valley walls are stiff enough (Hessian norm up to ~1e3) that
            # random far-out states overflow at step 0.1
            q0 = np.array([0.3, 0.2])
            p0 = np.array([0.7, -0.4])
        else:
            q0 = rng.normal(size=model.n) * 0.5
            p0 = rng.normal(size=model.n)
        ke = euclidean_quadratic(np.eye(model.n))
        err_e = _roundtrip_explicit(model, ke, q0, p0, 0.1, 20)
        if model.name == "banana":
            ki = ke
        else:
            ki = riemannian_quadratic(GraphMetric(model))
        err_i = _roundtrip_generalized(model, ki, q0, p0, 0.1, 20, 1e-12)
        worst_explicit = max(worst_explicit, err_e)
        worst_implicit = max(worst_implicit, err_i)
        detail.append(f"{model.name}: explicit {err_e:.1e} implicit {err_i:.1e}")
    passed = worst_explicit <= 1e-10 and worst_implicit <= 1e-8
    return _finish(
        "reversibility",
        passed,
        max(worst_explicit, worst_implicit),
        "explicit <= 1e-10, implicit <= 1e-8",
        "; ".join(detail),
        t0,
    )


def check_volume_preservation(states: int = 10):
    """|det J - 1| of one step at random states, explicit and implicit."""
    t0 = time.perf_counter()
    g2 = builtin_target("std_gaussian", n=2)
    ke = euclidean_quadratic(np.array([[1.3, 0.4], [0.4, 0.9]]))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(states):
        worst = max(
            worst, volume_check(g2, ke, rng.normal(size=2), rng.normal(size=2), 0.1)
        )
    ban = builtin_target("banana")
    kb = riemannian_quadratic(GraphMetric(ban))
    rng = np.random.default_rng(7)
    worst_impl = 0.0
    for _ in range(states):
        q0 = np.array([1.0, 1.0]) + rng.normal(size=2) * np.array([0.05, 0.1])
        p0 = rng.normal(size=2) * 0.08
        worst_impl = max(worst_impl, volume_check(ban, kb, q0, p0, 0.01))
    measured = max(worst, worst_impl)
    return _finish(
        "volume-preservation",
        measured < 1e-6,
        measured,
        "< 1e-6",
        f"explicit {worst:.1e}; implicit {worst_impl:.1e}",
        t0,
    )


def _max_energy_drift(model, kin, q0, p0, eps, steps, fp_tol=1e-12):
    cfg = IntegratorConfig(eps, steps, fp_tol=fp_tol)
    traj = integrate(model, kin, PhaseState(np.asarray(q0, float), np.asarray(p0, float)), cfg)
    return float(np.max(np.abs(traj.energies - traj.energies[0])))


def check_energy_error_order():
    """Halving the step size must cut the peak energy error by about four."""
    t0 = time.perf_counter()
    g1 = builtin_target("std_gaussian", n=1)
    ke1 = euclidean_quadratic(np.eye(1))
    r_harm = _max_energy_drift(g1, ke1, [1.0], [0.5], 0.2, 10) / _max_energy_drift(
        g1, ke1, [1.0], [0.5], 0.1, 20
    )
    ban = builtin_target("banana")
    ke2 = euclidean_quadratic(np.eye(2))
    r_ban = _max_energy_drift(ban, ke2, [0.3, 0.2], [0.7, -0.4], 0.02, 100) / _max_energy_drift(
        ban, ke2, [0.3, 0.2], [0.7, -0.4], 0.01, 200
    )
    kg1 = riemannian_quadratic(GraphMetric(g1))
    r_impl = _max_energy_drift(g1, kg1, [1.0], [0.5], 0.02, 100) / _max_energy_drift(
        g1, kg1, [1.0], [0.5], 0.01, 200
    )
    ratios = {"harmonic": r_harm, "banana": r_ban, "implicit-graph": r_impl}
    passed = all(3.5 <= r <= 4.5 for r in ratios.values())
    measured = max(ratios.values(), key=lambda r: abs(r - 4.0))
    detail = "; ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    return _finish("energy-error-order", passed, measured, "in [3.5, 4.5]", detail, t0)


def _linear_model(n, g):
    # constant-gradient target: lets the rank-1 machinery run with arbitrary g
    return TargetModel(
        n=n,
        potential=lambda q, g=g: float(g @ q),
        gradient=lambda q, g=g: g.copy(),
        hessian=lambda q, n=n: np.zeros((n, n)),
        name="linear",
    )


def check_smw_inverse(sizes=(1, 2, 5, 20, 50), instances: int = 20):
    """Rank-1 inverse and log-determinant against dense linear algebra."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    worst_inv = 0.0
    worst_det = 0.0
    for n in sizes:
        for _ in range(instances):
            a = rng.normal(size=(n, n))
            sigma = a @ a.T + 0.5 * n * np.eye(n)
            g = rng.normal(size=n) * rng.uniform(0.2, 5.0)
            field = GraphMetric(_linear_model(n, g), BackgroundMetric.from_matrix(sigma))
            lam, logdet = metric_inverse(field, np.zeros(n))
            dense = sigma + np.outer(g, g)
            worst_inv = max(worst_inv, float(np.max(np.abs(lam - np.linalg.inv(dense)))))
            _, ld_dense = np.linalg.slogdet(dense)
            worst_det = max(worst_det, abs(logdet - ld_dense) / max(abs(ld_dense), 1.0))
    measured = max(worst_inv, worst_det)
    return _finish(
        "smw-inverse",
        measured < 1e-10,
        measured,
        "< 1e-10",
        f"inverse {worst_inv:.1e}; logdet rel {worst_det:.1e}",
        t0,
    )


def finite_difference_christoffel(field: GraphMetric, q, h: float = 1e-5) -> np.ndarray:
    """Connection coefficients from central differences of the dense metric.

    Independent of the closed form: builds d(Sigma)/dq numerically and applies
    the standard formula G^i_jk = lam^im (d_j S_mk + d_k S_mj - d_m S_jk) / 2
    with a dense inverse.
    """
    n = field.n
    sigma = field.background.sigma

    def dense_metric(qq):
        g = field.corrected_grad(qq)
        return sigma + np.outer(g, g)

    ds = np.empty((n, n, n))
    for l in range(n):
        qp = q.copy()
        qm = q.copy()
        qp[l] += h
        qm[l] -= h
        ds[l] = (dense_metric(qp) - dense_metric(qm)) / (2.0 * h)
    lam = np.linalg.inv(dense_metric(q))
    term = np.einsum("im,jmk->ijk", lam, ds)
    term += np.einsum("im,kmj->ijk", lam, ds)
    term -= np.einsum("im,mjk->ijk", lam, ds)
    return 0.5 * term


def check_christoffel(points: int = 20):
    """Closed-form connection coefficients against the finite-difference oracle."""
    t0 = time.perf_counter()
    ban = builtin_target("banana")
    field = GraphMetric(ban)
    rng = np.random.default_rng(15)
    worst = 0.0
    for _ in range(points):
        q = np.array([rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 3.0)])
        gamma = field.christoffel(q)
        gamma_fd = finite_difference_christoffel(field, q)
        rel = float(np.max(np.abs(gamma - gamma_fd)) / max(np.max(np.abs(gamma)), 1e-6))
        worst = max(worst, rel)
    return _finish("christoffel", worst < 1e-4, worst, "rel err < 1e-4", "", t0)


def _well_conditioned_spd(rng, n, lo=0.5, hi=2.0):
    qmat, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return qmat @ np.diag(rng.uniform(lo, hi, size=n)) @ qmat.T


def check_reflection(probes: int = 1000):
    """Reflections conserve the kinetic energy exactly and are involutions.

    Probe metrics are kept well conditioned so the stated absolute tolerances
    measure exactness at machine precision rather than conditioning.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(21)
    worst_energy = 0.0
    worst_invol = 0.0
    dims = (1, 2, 3, 5)
    for i in range(probes):
        n = dims[i % len(dims)]
        lam = _well_conditioned_spd(rng, n)
        kq = euclidean_quadratic(lam)
        kt = student_t(lam, nu=rng.uniform(0.5, 10.0))
        p = rng.normal(size=n)
        dc = rng.normal(size=n)
        while float(np.linalg.norm(dc)) < 1e-6:
            dc = rng.normal(size=n)
        q = np.zeros(n)
        p_ref = reflect_momentum(p, dc, lam)
        for kin in (kq, kt):
            worst_energy = max(worst_energy, abs(kin.energy(q, p_ref) - kin.energy(q, p)))
        p_back = reflect_momentum(p_ref, dc, lam)
        # involution error measured at unit momentum scale
        scale = max(1.0, float(np.max(np.abs(p))), float(np.max(np.abs(p_ref))))
        worst_invol = max(worst_invol, float(np.max(np.abs(p_back - p))) / scale)
    passed = worst_energy <= 1e-13 and worst_invol <= 1e-15
    return _finish(
        "reflection",
        passed,
        max(worst_energy, worst_invol),
        "energy <= 1e-13, involution <= 1e-15",
        f"energy {worst_energy:.1e}; involution {worst_invol:.1e}",
        t0,
    )


def check_momentum_symmetry(probes: int = 1000):
    """T(q, -p) = T(q, p) and dT/dp odd, for every kinetic family."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(33)
    ban = builtin_target("banana")
    field = GraphMetric(ban)
    kinetics = [
        ("euclidean", euclidean_quadratic(np.array([[2.0, 0.3], [0.3, 1.0]])), None),
        ("graph-quadratic", riemannian_quadratic(field), "banana"),
        ("student-t", student_t(np.array([[2.0, 0.3], [0.3, 1.0]]), nu=4.0), None),
        ("graph-student-t", student_t(field, nu=4.0), "banana"),
    ]
    worst = 0.0
    for _ in range(probes // len(kinetics)):
        q = rng.normal(size=2) * 0.8
        p = rng.normal(size=2) * 2.0
        for _, kin, _tag in kinetics:
            even = abs(kin.energy(q, -p) - kin.energy(q, p))
            odd = float(np.max(np.abs(kin.grad_p(q, -p) + kin.grad_p(q, p))))
            worst = max(worst, even, odd)
    return _finish("momentum-symmetry", worst <= 1e-12, worst, "<= 1e-12", "", t0)


def _well_conditioned_map(rng, n):
    q1, _ = np.linalg.qr(rng.normal(size=(n, n)))
    q2, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return q1 @ np.diag(rng.uniform(0.5, 2.0, size=n)) @ q2


def check_coordinate_invariance(maps: int = 20):
    """H is a scalar: under Q = A q the kinetic and potential terms shift by
    opposite log-Jacobian factors and the total energy is unchanged."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(44)
    n = 3
    base = builtin_target("std_gaussian", n=n)
    lam = np.array([[1.5, 0.2, 0.0], [0.2, 1.0, 0.1], [0.0, 0.1, 0.8]])
    kinetics = [euclidean_quadratic(lam), student_t(lam, nu=6.0)]
    worst = 0.0
    for _ in range(maps):
        amat = _well_conditioned_map(rng, n)
        ainv = np.linalg.inv(amat)
        _, log_abs_det = np.linalg.slogdet(amat)
        lam_t = amat @ lam @ amat.T
        kinetics_t = [euclidean_quadratic(lam_t), student_t(lam_t, nu=6.0)]
        transformed = TargetModel(
            n=n,
            potential=lambda qq, ainv=ainv, c=log_abs_det: float(
                base.potential(ainv @ qq) + c
            ),
            gradient=lambda qq, ainv=ainv: ainv.T @ base.gradient(ainv @ qq),
            name="std_gaussian-mapped",
        )
        q = rng.normal(size=n)
        p = rng.normal(size=n)
        q_t = amat @ q
        p_t = ainv.T @ p
        for kin, kin_t in zip(kinetics, kinetics_t):
            h = base.potential(q) + kin.energy(q, p)
            h_t = transformed.potential(q_t) + kin_t.energy(q_t, p_t)
            worst = max(worst, abs(h_t - h))
    return _finish("coordinate-invariance", worst <= 1e-12, worst, "<= 1e-12", "", t0)


def check_stationarity(chains: int = 10000):
    """One transition applied to exact draws must keep the target's moments."""
    t0 = time.perf_counter()
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    cfg = ChainConfig(seed=0, num_samples=1, integrator=IntegratorConfig(0.1, 20))
    rng = np.random.default_rng(77)
    start = rng.standard_normal(chains)
    out = np.empty(chains)
    for i in range(chains):
        q, _, _ = hmc_transition(model, kin, np.array([start[i]]), cfg, rng)
        out[i] = q[0]
    z_mean = abs(out.mean()) * math.sqrt(chains)
    z_var = abs(out.var(ddof=1) - 1.0) / math.sqrt(2.0 / chains)
    measured = max(z_mean, z_var)
    return _finish(
        "stationarity",
        measured <= 4.0,
        measured,
        "<= 4 sigma",
        f"mean {z_mean:.2f} sigma; var {z_var:.2f} sigma",
        t0,
    )


def check_constrained_sampling(num_samples: int = 20000):
    """Half-space Gaussian: feasibility and the half-normal moments."""
    t0 = time.perf_counter()
    model = builtin_target("halfspace_gaussian")
    kin = euclidean_quadratic(np.eye(1))
    cfg = ChainConfig(
        seed=3,
        num_samples=num_samples,
        warmup=200,
        integrator=IntegratorConfig(0.15, 10),
        jitter_steps=True,
    )
    res = run_chain(model, kin, cfg)
    infeasible = int(np.sum(res.samples[:, 0] <= 0.0))
    mean_dev = abs(res.mean[0] - math.sqrt(2.0 / math.pi))
    m2_dev = abs(float(np.mean(res.samples[:, 0] ** 2)) - 1.0)
    passed = infeasible == 0 and mean_dev <= 0.02 and m2_dev <= 0.05
    measured = max(mean_dev / 0.02, m2_dev / 0.05, float(infeasible))
    return _finish(
        "constrained-sampling",
        passed,
        measured,
        "normalized deviation <= 1, zero infeasible",
        f"infeasible {infeasible}; mean dev {mean_dev:.4f} (<=0.02); "
        f"2nd moment dev {m2_dev:.4f} (<=0.05)",
        t0,
    )


def check_gaussian_sampling(num_samples: int = 20000):
    """Unit Gaussian chain: ESS floor and first two moments."""
    t0 = time.perf_counter()
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    cfg = ChainConfig(
        seed=1,
        num_samples=num_samples,
        warmup=100,
        integrator=IntegratorConfig(0.2, 8),
        jitter_steps=True,
    )
    res = run_chain(model, kin, cfg)
    ess = float(res.ess[0])
    var = float(res.cov[0, 0])
    passed = ess > 1000.0 and abs(res.mean[0]) <= 0.05 and 0.90 <= var <= 1.10
    measured = max(abs(res.mean[0]) / 0.05, abs(var - 1.0) / 0.10)
    return _finish(
        "gaussian-sampling",
        passed,
        measured,
        "ESS > 1000, |mean| <= 0.05, var in [0.90, 1.10]",
        f"ess {ess:.0f}; mean {res.mean[0]:.4f}; var {var:.4f}",
        t0,
    )


def check_mvn_sampling(num_samples: int = 10000):
    """Correlated Gaussian with a user-supplied constant inverse metric."""
    t0 = time.perf_counter()
    cov = np.array([[1.0, 0.9], [0.9, 1.0]])
    model = builtin_target("mvn", mean=[0.0, 0.0], cov=cov)
    kin = euclidean_quadratic(np.linalg.inv(cov))
    cfg = ChainConfig(
        seed=5,
        num_samples=num_samples,
        warmup=200,
        integrator=IntegratorConfig(0.12, 50),
        jitter_steps=True,
    )
    res = run_chain(model, kin, cfg)
    rel = np.abs(res.cov - cov) / np.abs(cov)
    measured = float(np.max(rel))
    ess_min = float(np.min(res.ess))
    passed = measured <= 0.10 and ess_min > 500.0
    return _finish(
        "mvn-sampling",
        passed,
        measured,
        "covariance entries within 10%, ESS > 500",
        f"max rel dev {measured:.3f}; min ess {ess_min:.0f}",
        t0,
    )


def check_jitter_mixing(num_samples: int = 4000):
    """Path-length jitter breaks the period trap at step*length near pi."""
    t0 = time.perf_counter()
    model = builtin_target("std_gaussian", n=1)
    kin = euclidean_quadratic(np.eye(1))
    cfg = ChainConfig(
        seed=8,
        num_samples=num_samples,
        warmup=100,
        integrator=IntegratorConfig(math.pi / 20.0, 20),
        jitter_steps=True,
    )
    res = run_chain(model, kin, cfg)
    ess = float(res.ess[0])
    return _finish(
        "jitter-mixing",
        ess > 0.05 * num_samples,
        ess,
        f"ESS > {0.05 * num_samples:.0f}",
        f"ess {ess:.0f} of {num_samples}",
        t0,
    )


def _best_time(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def check_cost_scaling(sizes=(64, 128, 256, 512)):
    """Fitted wall-time exponent of the rank-1 inverse versus dense inversion."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    smw_times = []
    dense_times = []
    for n in sizes:
        a = rng.normal(size=(n, n))
        sigma = a @ a.T + n * np.eye(n)
        bg = BackgroundMetric.from_matrix(sigma)
        model = builtin_target("std_gaussian", n=n)
        field = GraphMetric(model, bg)
        q = rng.normal(size=n)
        reps = max(5, 8192 // n)
        smw_times.append(_best_time(lambda: metric_inverse(field, q), reps))

        def dense(q=q, model=model, sigma=sigma):
            g = potential_grad(model, q)
            mat = sigma + np.outer(g, g)
            np.linalg.inv(mat)
            np.linalg.slogdet(mat)

        dense_times.append(_best_time(dense, max(3, reps // 4)))
    logs = np.log(np.asarray(sizes, dtype=float))
    smw_exp = float(np.polyfit(logs, np.log(smw_times), 1)[0])
    dense_exp = float(np.polyfit(logs, np.log(dense_times), 1)[0])
    return _finish(
        "cost-scaling",
        smw_exp < 2.3,
        smw_exp,
        "rank-1 exponent < 2.3",
        f"rank-1 {smw_exp:.2f}; dense oracle {dense_exp:.2f}",
        t0,
    )


QUICK_CHECKS = (
    check_reversibility,
    check_volume_preservation,
    check_energy_error_order,
    check_smw_inverse,
    check_christoffel,
    check_reflection,
    check_momentum_symmetry,
    check_coordinate_invariance,
    check_stationarity,
    check_constrained_sampling,
    check_gaussian_sampling,
    check_mvn_sampling,
)

FULL_CHECKS = QUICK_CHECKS + (check_jitter_mixing, check_cost_scaling)


def run_checks(level: str = "quick"):
    """Run the named profile; returns a list of CheckResult."""
    if level not in ("quick", "full"):
        raise ValueError(f"unknown verification level {level!r}")
    checks = QUICK_CHECKS if level == "quick" else FULL_CHECKS
    return [check() for check in checks]
