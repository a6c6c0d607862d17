"""Symplectic integration of the sampling dynamics, with boundary reflections.

Two integrators cover the two kinetic families: the explicit leapfrog for
position-independent kinetic energies (separable Hamiltonians) and a
generalized leapfrog for position-dependent ones, whose first half-kick and
drift are implicit equations solved by fixed-point iteration.  Both are
symmetric second-order maps, hence reversible and volume-preserving, which is
what the Metropolis correction in the sampler assumes.

Strict inequality constraints are handled inside the drift: when a constraint
function changes sign across a drift substep, the crossing is located by
bisection, the trajectory advances to the boundary, and the momentum reflects
through Delta p = -2 (n, p)_Lam n with n the unit constraint normal under the
inverse-metric inner product (a, b)_Lam = a.Lam b.  The reflection conserves
any kinetic energy built on the quadratic form p.Lam p exactly, so only the
discretization of the partial steps contributes to the energy error.

Numerical failures (non-convergent implicit solves, too many reflections in
one step, non-finite energy) raise DivergenceError; the sampler treats that
as an automatic rejection, equivalent to proposing a state of infinite energy.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError, GeometryError, UsageError
from .model import TargetModel, as_position, potential_eval, potential_grad

__all__ = [
    "IntegratorConfig",
    "PhaseState",
    "ReflectionEvent",
    "Trajectory",
    "hamiltonian",
    "flow_derivatives",
    "leapfrog_step",
    "generalized_leapfrog_step",
    "reflect_momentum",
    "integrate",
    "volume_check",
]


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, step count, and tolerances for implicit solves and reflections."""

    step_size: float
    num_steps: int
    fp_tol: float = 1e-10
    fp_max_iter: int = 100
    reflection_tol: float = 1e-10
    reflection_max_events: int = 8

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise UsageError("step_size must be positive")
        if self.num_steps < 1:
            raise UsageError("num_steps must be at least 1")
        if self.fp_tol <= 0.0 or self.reflection_tol <= 0.0:
            raise UsageError("tolerances must be positive")
        if self.fp_max_iter < 1 or self.reflection_max_events < 1:
            raise UsageError("iteration limits must be at least 1")


@dataclass
class PhaseState:
    """A phase-space point with an optionally cached energy value."""

    q: np.ndarray
    p: np.ndarray
    energy: Optional[float] = None


@dataclass(frozen=True)
class ReflectionEvent:
    """One boundary reflection: where it happened and the momentum jump."""

    step_index: int
    constraint_index: int
    q: np.ndarray
    p_before: np.ndarray
    p_after: np.ndarray


@dataclass
class Trajectory:
    """Integration output: final state, energy trace, reflection events.

    ``energies[0]`` is the initial energy and ``energies[k]`` the energy after
    the k-th full step.
    """

    state: PhaseState
    energies: np.ndarray
    reflections: tuple = field(default_factory=tuple)

    @property
    def reflection_count(self) -> int:
        return len(self.reflections)


def hamiltonian(model: TargetModel, kinetic, q, p) -> float:
    """Total energy V(q) + T(q, p); +inf when q is infeasible."""
    v = potential_eval(model, q)
    if not math.isfinite(v):
        return math.inf
    return v + kinetic.energy(q, p)


def flow_derivatives(model: TargetModel, kinetic, q, p):
    """(dq/dt, dp/dt) of the energy-conserving flow at a feasible point."""
    dq = kinetic.grad_p(q, p)
    dp = -(potential_grad(model, q) + kinetic.grad_q(q, p))
    return dq, dp


def reflect_momentum(p, dc, lam) -> np.ndarray:
    """Specular reflection of p off the surface with normal one-form dc.

    p' = p - 2 (dc.Lam p / dc.Lam dc) dc.  Components parallel to the
    constraint level set are untouched and the quadratic form p.Lam p is
    conserved exactly, for any SPD Lam.
    """
    p = np.asarray(p, dtype=float)
    dc = np.asarray(dc, dtype=float)
    lam_dc = np.asarray(lam, dtype=float) @ dc
    norm2 = float(dc @ lam_dc)
    if not math.isfinite(norm2) or norm2 <= 0.0:
        raise GeometryError("constraint normal has non-positive norm under the inverse metric")
    return p - (2.0 * float(lam_dc @ p) / norm2) * dc


def leapfrog_step(model: TargetModel, kinetic, q, p, step_size: float):
    """One kick-drift-kick step for a position-independent kinetic energy."""
    if kinetic.position_dependent:
        raise UsageError("leapfrog_step requires a position-independent kinetic energy")
    q = as_position(q, model.n)
    p = as_position(p, model.n)
    p = p - 0.5 * step_size * potential_grad(model, q)
    q = q + step_size * kinetic.grad_p(q, p)
    p = p - 0.5 * step_size * potential_grad(model, q)
    return q, p


def _implicit_momentum_update(kinetic, q, p, dv, dt, fp_tol, fp_max_iter):
    # solve x = p - dt*(dv + grad_q(q, x)) by fixed-point iteration
    with np.errstate(over="ignore", invalid="ignore"):
        x = p - dt * (dv + kinetic.grad_q(q, p))
        for _ in range(fp_max_iter):
            if not np.all(np.isfinite(x)):
                break
            x_new = p - dt * (dv + kinetic.grad_q(q, x))
            delta = float(np.max(np.abs(x_new - x)))
            x = x_new
            if delta <= fp_tol:
                return x
    raise DivergenceError("implicit momentum update did not converge")


def _implicit_position_update(kinetic, q, p, u0, dt, fp_tol, fp_max_iter):
    # solve y = q + dt/2*(u0 + grad_p(y, p)) by fixed-point iteration
    with np.errstate(over="ignore", invalid="ignore"):
        y = q + dt * u0
        for _ in range(fp_max_iter):
            if not np.all(np.isfinite(y)):
                break
            y_new = q + 0.5 * dt * (u0 + kinetic.grad_p(y, p))
            delta = float(np.max(np.abs(y_new - y)))
            y = y_new
            if delta <= fp_tol:
                return y
    raise DivergenceError("implicit position update did not converge")


def generalized_leapfrog_step(
    model: TargetModel,
    kinetic,
    q,
    p,
    step_size: float,
    fp_tol: float = 1e-10,
    fp_max_iter: int = 100,
):
    """One implicit kick / implicit drift / explicit kick step.

    The symmetric composition makes the map second order and reversible up to
    the fixed-point tolerance; with a constant metric every implicit equation
    becomes explicit and the step reduces to the plain leapfrog.
    """
    q = as_position(q, model.n)
    p = as_position(p, model.n)
    dv = potential_grad(model, q)
    p_half = _implicit_momentum_update(kinetic, q, p, dv, 0.5 * step_size, fp_tol, fp_max_iter)
    u0 = kinetic.grad_p(q, p_half)
    q_new = _implicit_position_update(kinetic, q, p_half, u0, step_size, fp_tol, fp_max_iter)
    p_new = p_half - 0.5 * step_size * (
        potential_grad(model, q_new) + kinetic.grad_q(q_new, p_half)
    )
    return q_new, p_new


def _bisect_crossing(c_fun, s_hi, tol, max_iter=120):
    # c_fun(0) > 0 >= c_fun(s_hi); return s on the feasible side with |C| <= tol
    lo, hi = 0.0, s_hi
    c_lo = c_fun(0.0)
    for _ in range(max_iter):
        if abs(c_lo) <= tol or (hi - lo) <= 1e-16 * max(1.0, abs(s_hi)):
            break
        mid = 0.5 * (lo + hi)
        c_mid = c_fun(mid)
        if c_mid > 0.0:
            lo, c_lo = mid, c_mid
        else:
            hi = mid
    return lo


def _first_crossing(model, path, q_end, s_total, tol):
    # earliest constraint crossing along path(s), ties broken by constraint index
    hits = []
    for k, con in enumerate(model.constraints):
        if float(con.value(q_end)) <= 0.0:
            s_k = _bisect_crossing(lambda s, c=con: float(c.value(path(s))), s_total, tol)
            hits.append((s_k, k))
    return min(hits) if hits else None


def _drift_with_events(model, kinetic, q, p, dt, config, make_path, events, step_index):
    remaining = dt
    n_events = 0
    while True:
        path = make_path(q, p)
        q_end = path(remaining)
        hit = _first_crossing(model, path, q_end, remaining, config.reflection_tol)
        if hit is None:
            return q_end, p
        s_hit, k = hit
        n_events += 1
        if n_events > config.reflection_max_events:
            raise DivergenceError(
                f"more than {config.reflection_max_events} reflections in one step"
            )
        q = path(s_hit) if s_hit > 0.0 else q
        dc = np.asarray(model.constraints[k].grad(q), dtype=float)
        p_new = reflect_momentum(p, dc, kinetic.lambda_at(q))
        events.append(
            ReflectionEvent(
                step_index=step_index,
                constraint_index=k,
                q=q.copy(),
                p_before=p.copy(),
                p_after=p_new.copy(),
            )
        )
        p = p_new
        remaining -= s_hit
        if remaining <= 0.0:
            return q, p


def _explicit_step_reflective(model, kinetic, q, p, config, events, step_index):
    eps = config.step_size
    p = p - 0.5 * eps * potential_grad(model, q)

    def make_path(q0, p0):
        v = kinetic.grad_p(q0, p0)  # constant along the drift
        return lambda s: q0 + s * v

    q, p = _drift_with_events(model, kinetic, q, p, eps, config, make_path, events, step_index)
    p = p - 0.5 * eps * potential_grad(model, q)
    return q, p


def _generalized_step_reflective(model, kinetic, q, p, config, events, step_index):
    eps = config.step_size
    dv = potential_grad(model, q)
    p_half = _implicit_momentum_update(
        kinetic, q, p, dv, 0.5 * eps, config.fp_tol, config.fp_max_iter
    )

    def make_path(q0, p0):
        u0 = kinetic.grad_p(q0, p0)

        def path(s):
            if s <= 0.0:
                return q0
            return _implicit_position_update(
                kinetic, q0, p0, u0, s, config.fp_tol, config.fp_max_iter
            )

        return path

    q_new, p_half = _drift_with_events(
        model, kinetic, q, p_half, eps, config, make_path, events, step_index
    )
    p_new = p_half - 0.5 * eps * (
        potential_grad(model, q_new) + kinetic.grad_q(q_new, p_half)
    )
    return q_new, p_new


def integrate(model: TargetModel, kinetic, state: PhaseState, config: IntegratorConfig) -> Trajectory:
    """Run num_steps of the appropriate leapfrog, reflecting off constraints.

    Raises UsageError when the initial state has infinite energy and
    DivergenceError when the trajectory fails numerically.
    """
    q = as_position(state.q, model.n).copy()
    p = as_position(state.p, model.n).copy()
    h0 = hamiltonian(model, kinetic, q, p)
    if not math.isfinite(h0):
        raise UsageError("initial state must be feasible with finite energy")
    energies = np.empty(config.num_steps + 1)
    energies[0] = h0
    events = []
    for step in range(config.num_steps):
        # blowups surface as a divergence signal, not as numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            if kinetic.position_dependent:
                q, p = _generalized_step_reflective(model, kinetic, q, p, config, events, step)
            else:
                q, p = _explicit_step_reflective(model, kinetic, q, p, config, events, step)
            if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
                raise DivergenceError("non-finite state during integration")
            h = hamiltonian(model, kinetic, q, p)
        if not math.isfinite(h):
            raise DivergenceError("non-finite energy during integration")
        energies[step + 1] = h
    final = PhaseState(q=q, p=p, energy=float(energies[-1]))
    return Trajectory(state=final, energies=energies, reflections=tuple(events))


def volume_check(
    model: TargetModel,
    kinetic,
    q,
    p,
    step_size: float,
    h: float = 1e-6,
    fp_tol: float = 1e-14,
    fp_max_iter: int = 500,
) -> float:
    """|det J - 1| for the Jacobian of one integrator step at (q, p).

    The 2n x 2n Jacobian is built column by column from central differences
    with perturbation h; the state must sit in an unconstrained neighborhood.
    Implicit steps are solved to fp_tol so the differencing noise stays well
    below the h-scale signal.
    """
    q = as_position(q, model.n)
    p = as_position(p, model.n)
    n = model.n

    def step_map(z):
        qq, pp = z[:n], z[n:]
        if kinetic.position_dependent:
            q2, p2 = generalized_leapfrog_step(
                model, kinetic, qq, pp, step_size, fp_tol, fp_max_iter
            )
        else:
            q2, p2 = leapfrog_step(model, kinetic, qq, pp, step_size)
        return np.concatenate([q2, p2])

    z0 = np.concatenate([q, p])
    jac = np.empty((2 * n, 2 * n))
    for i in range(2 * n):
        zp = z0.copy()
        zm = z0.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (step_map(zp) - step_map(zm)) / (2.0 * h)
    return abs(float(np.linalg.det(jac)) - 1.0)
