"""Metropolis-corrected transition kernel, chain driver, and diagnostics.

Each transition refreshes the momentum from its exact conditional (a Gibbs
move across energy contours), integrates the dynamics for a possibly jittered
number of steps, flips the momentum to make the proposal an involution, and
accepts with probability min(1, exp(H_start - H_end)).  The momentum is
discarded after the decision; only positions are retained.  Trajectories that
fail numerically count as divergences and are rejected outright.

Only energy differences ever enter the accept decision, so potentials defined
up to an additive constant are fine.  Chains own their generator: runs are
bit-reproducible from the seed, and independent chains can execute in
parallel without shared state.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError, UsageError
from .integrator import IntegratorConfig, PhaseState, hamiltonian, integrate
from .model import TargetModel, as_position, potential_eval

__all__ = [
    "ChainConfig",
    "ChainResult",
    "hmc_transition",
    "run_chain",
    "effective_sample_size",
]


@dataclass(frozen=True)
class ChainConfig:
    """Seed, sample counts, integrator settings, and step-count jitter.

    With ``jitter_steps`` the number of leapfrog steps is drawn uniformly from
    {1, ..., num_steps} each transition, which breaks the phase-space cycles a
    fixed trajectory length can lock into.
    """

    seed: int
    num_samples: int
    integrator: IntegratorConfig
    warmup: int = 0
    jitter_steps: bool = False

    def __post_init__(self):
        if self.num_samples < 1:
            raise UsageError("num_samples must be at least 1")
        if self.warmup < 0:
            raise UsageError("warmup must be non-negative")


@dataclass
class ChainResult:
    """Retained samples plus acceptance, energy-error, and moment diagnostics."""

    samples: np.ndarray
    accepted: np.ndarray
    delta_h: np.ndarray
    divergence_count: int
    mean: np.ndarray
    cov: np.ndarray
    ess: np.ndarray

    @property
    def accept_rate(self) -> float:
        return float(np.mean(self.accepted))


def hmc_transition(model: TargetModel, kinetic, q, cfg: ChainConfig, rng):
    """One transition from position q; returns (position, accepted, delta_h).

    Divergent trajectories never contribute a proposal: the chain stays put
    and delta_h is +inf so the caller can count them.
    """
    q = as_position(q, model.n)
    p = kinetic.sample_momentum(q, rng)
    h_start = hamiltonian(model, kinetic, q, p)
    num_steps = cfg.integrator.num_steps
    if cfg.jitter_steps:
        num_steps = int(rng.integers(1, cfg.integrator.num_steps + 1))
    icfg = replace(cfg.integrator, num_steps=num_steps)
    try:
        traj = integrate(model, kinetic, PhaseState(q=q, p=p, energy=h_start), icfg)
    except DivergenceError:
        return q, False, math.inf
    # The momentum flip makes the proposal an involution; every implemented
    # kinetic energy is even in p, so it costs nothing.
    q_end = traj.state.q
    p_end = -traj.state.p
    h_end = hamiltonian(model, kinetic, q_end, p_end)
    delta_h = h_end - h_start
    if math.log(rng.uniform()) < h_start - h_end:
        return q_end, True, delta_h
    return q, False, delta_h


def run_chain(model: TargetModel, kinetic, cfg: ChainConfig, initial=None) -> ChainResult:
    """Run warmup + num_samples transitions and summarize the retained ones.

    The initial point defaults to the target's catalog-provided one; either
    way it must be feasible with finite potential.
    """
    if initial is None:
        initial = model.initial_point
    if initial is None:
        raise UsageError(
            f"target {model.name!r} provides no initial point; pass one explicitly"
        )
    q = as_position(initial, model.n).copy()
    if not math.isfinite(potential_eval(model, q)):
        raise UsageError("initial point is infeasible or has non-finite potential")

    rng = np.random.default_rng(cfg.seed)
    n = model.n
    samples = np.empty((cfg.num_samples, n))
    accepted = np.zeros(cfg.num_samples, dtype=bool)
    delta_h = np.empty(cfg.num_samples)
    for t in range(cfg.warmup + cfg.num_samples):
        q, acc, dh = hmc_transition(model, kinetic, q, cfg, rng)
        k = t - cfg.warmup
        if k >= 0:
            samples[k] = q
            accepted[k] = acc
            delta_h[k] = dh

    divergences = int(np.sum(~np.isfinite(delta_h)))
    mean = samples.mean(axis=0)
    if cfg.num_samples > 1:
        cov = np.atleast_2d(np.cov(samples, rowvar=False))
    else:
        cov = np.full((n, n), np.nan)
    if cfg.num_samples >= 100:
        ess = np.array([effective_sample_size(samples[:, j]) for j in range(n)])
    else:
        ess = np.full(n, np.nan)
    return ChainResult(
        samples=samples,
        accepted=accepted,
        delta_h=delta_h,
        divergence_count=divergences,
        mean=mean,
        cov=cov,
        ess=ess,
    )


def effective_sample_size(series) -> float:
    """ESS from the autocorrelation time, truncated by initial positive pairs.

    Autocorrelations are summed in adjacent pairs until a pair sum goes
    non-positive; tau = 2 * (partial sum) - 1 and ESS = N / tau.  A constant
    series has no autocorrelation structure and counts as N by convention.
    """
    x = np.asarray(series, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise UsageError("effective_sample_size needs at least 100 samples")
    x = x - x.mean()
    c0 = float(x @ x) / n
    if c0 == 0.0 or not math.isfinite(c0):
        return float(n)
    # autocovariance via FFT
    m = 1
    while m < 2 * n:
        m *= 2
    f = np.fft.rfft(x, m)
    acov = np.fft.irfft(f * np.conj(f), m)[:n].real / n
    rho = acov / acov[0]
    # Initial positive sequence over pair sums rho[2m] + rho[2m+1]
    total = 0.0
    for m2 in range(0, n - 1, 2):
        pair = rho[m2] + rho[m2 + 1]
        if pair <= 0.0:
            break
        total += pair
    tau = max(2.0 * total - 1.0, 1e-8)
    return float(n / tau)
