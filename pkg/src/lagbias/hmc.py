"""Hamiltonian Monte Carlo with dual-averaging step-size adaptation.

A compact HMC implementation sufficient for the low-dimensional bias
model: leapfrog integration with an identity mass matrix, path length
jittered around a fixed number of steps, and step size tuned during
warmup by Nesterov dual averaging toward a target acceptance rate.

Densities are duck-typed: any object with ``dim``, ``logp(z) -> float``
and ``grad(z) -> ndarray`` works. If it also provides ``constrain(z)``,
draws are stored in constrained coordinates.

Every random number comes from a per-chain counter-based generator
seeded from ``(seed, chain index)``, so results are bit-for-bit
reproducible and independent of how chains are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata

DIVERGENCE_THRESHOLD = 1000.0
_STUCK_WINDOW = 100
_STUCK_ACCEPTANCE = 0.01


class SamplerError(RuntimeError):
    """Raised when a chain cannot be initialised or stops moving."""


@dataclass(frozen=True)
class HmcConfig:
    """Sampler settings; defaults match the headline analysis."""

    n_chains: int = 4
    n_warmup: int = 1000
    n_draws: int = 2000
    target_accept: float = 0.8
    leapfrog_steps: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.n_warmup < 1 or self.n_draws < 1:
            raise ValueError("n_warmup and n_draws must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.leapfrog_steps < 1:
            raise ValueError("leapfrog_steps must be >= 1")


@dataclass(frozen=True)
class DualAveragingState:
    """State of the dual-averaging recursion for log step size."""

    anchor: float            # log-step-size the iterates shrink toward
    log_eps: float
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    t: int = 0
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75


def dual_averaging_init(eps0: float) -> DualAveragingState:
    """Start dual averaging from a step-size guess."""
    return DualAveragingState(anchor=math.log(10.0 * eps0),
                              log_eps=math.log(eps0))


def dual_averaging_update(state: DualAveragingState, accept_prob: float,
                          target: float) -> DualAveragingState:
    """One dual-averaging step toward the target acceptance rate."""
    t = state.t + 1
    frac = 1.0 / (t + state.t0)
    h_bar = (1.0 - frac) * state.h_bar + frac * (target - accept_prob)
    log_eps = state.anchor - math.sqrt(t) / state.gamma * h_bar
    w = t ** (-state.kappa)
    log_eps_bar = w * log_eps + (1.0 - w) * state.log_eps_bar
    return replace(state, log_eps=log_eps, log_eps_bar=log_eps_bar,
                   h_bar=h_bar, t=t)


def leapfrog(z: np.ndarray, p: np.ndarray, step_size: float, n_steps: int,
             density) -> tuple[np.ndarray, np.ndarray]:
    """Integrate Hamiltonian dynamics for n_steps leapfrog steps.

    Returns the final (position, momentum). The integrator is exactly
    reversible: running it again from (z', -p') recovers (z, -p).
    """
    z = np.array(z, dtype=float)
    p = np.array(p, dtype=float)
    if n_steps == 0:
        return z, p
    p = p + 0.5 * step_size * density.grad(z)
    for step in range(n_steps):
        z = z + step_size * p
        g = density.grad(z)
        if step < n_steps - 1:
            p = p + step_size * g
    p = p + 0.5 * step_size * g
    return z, p


def find_reasonable_step_size(density, z: np.ndarray,
                              rng: np.random.Generator) -> float:
    """Double or halve the step size until one-step acceptance crosses 1/2."""
    eps = 1.0
    logp0 = density.logp(z)
    if not np.isfinite(logp0):
        raise SamplerError("initial point has non-finite log density")
    p = rng.standard_normal(len(z))
    h0 = -logp0 + 0.5 * float(p @ p)

    def energy_drop(eps):
        z1, p1 = leapfrog(z, p, eps, 1, density)
        lp = density.logp(z1)
        if not np.isfinite(lp) or not np.all(np.isfinite(p1)):
            return -np.inf
        return h0 - (-lp + 0.5 * float(p1 @ p1))

    drop = energy_drop(eps)
    direction = 1.0 if drop > math.log(0.5) else -1.0
    for _ in range(100):
        eps_next = eps * 2.0**direction
        if not 1e-10 < eps_next < 1e10:
            break
        drop = energy_drop(eps_next)
        if direction * drop < direction * math.log(0.5):
            break
        eps = eps_next
    return eps


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """Post-warmup draws and per-chain sampling statistics."""

    draws: np.ndarray           # (n_chains, n_draws, dim), constrained
    param_names: tuple[str, ...]
    step_size: np.ndarray       # (n_chains,) frozen after warmup
    acceptance: np.ndarray      # (n_chains,) mean acceptance probability
    divergences: np.ndarray     # (n_chains,) diverged iterations, int
    config: HmcConfig = dc_field(default_factory=HmcConfig)


def _run_chain(density, config: HmcConfig, chain: int, init):
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence([config.seed, chain]))
    )
    dim = density.dim
    z = np.array(init, dtype=float) if init is not None else rng.standard_normal(dim)
    logp = density.logp(z)
    if not (np.isfinite(logp) and np.all(np.isfinite(density.grad(z)))):
        raise SamplerError(
            f"chain {chain}: non-finite log density or gradient at the start"
        )

    eps = find_reasonable_step_size(density, z, rng)
    da = dual_averaging_init(eps)
    lo = max(1, math.ceil(0.5 * config.leapfrog_steps))
    hi = max(lo, math.floor(1.5 * config.leapfrog_steps))

    transform = getattr(density, "constrain", None)
    draws = np.empty((config.n_draws, dim))
    accept_sum = 0.0
    divergences = 0
    tail_start = max(0, config.n_warmup - _STUCK_WINDOW)
    tail_accept = 0.0

    for it in range(config.n_warmup + config.n_draws):
        warming = it < config.n_warmup
        n_steps = int(rng.integers(lo, hi + 1))
        p0 = rng.standard_normal(dim)
        h0 = -logp + 0.5 * float(p0 @ p0)
        z1, p1 = leapfrog(z, p0, eps, n_steps, density)
        logp1 = density.logp(z1)
        h1 = -logp1 + 0.5 * float(p1 @ p1)
        delta_h = h1 - h0

        diverged = not np.isfinite(delta_h) or abs(delta_h) > DIVERGENCE_THRESHOLD
        accept_prob = 0.0 if diverged else min(1.0, math.exp(-delta_h))
        u = rng.uniform()
        accepted = not diverged and u < accept_prob
        if accepted:
            z, logp = z1, logp1

        if warming:
            da = dual_averaging_update(da, accept_prob, config.target_accept)
            eps = math.exp(da.log_eps)
            if it >= tail_start:
                tail_accept += accept_prob
            if it == config.n_warmup - 1:
                if tail_accept / (config.n_warmup - tail_start) < _STUCK_ACCEPTANCE:
                    raise SamplerError(
                        f"chain {chain}: acceptance below 1% over the final "
                        f"{config.n_warmup - tail_start} warmup iterations"
                    )
                eps = math.exp(da.log_eps_bar)
        else:
            k = it - config.n_warmup
            draws[k] = transform(z) if transform is not None else z
            accept_sum += accept_prob
            divergences += diverged

    return draws, eps, accept_sum / config.n_draws, divergences


def sample(density, config: HmcConfig, init=None) -> PosteriorDraws:
    """Draw from a density with one independently seeded HMC chain per chain slot.

    Parameters
    ----------
    density : object with ``dim``, ``logp``, ``grad``; optional
        ``constrain`` (applied to stored draws) and ``param_names``.
    config : HmcConfig
    init : array, optional
        Unconstrained start shared by all chains; by default each chain
        starts from its own standard-normal draw.

    Raises
    ------
    SamplerError
        If a chain starts at a non-finite point or stops accepting.
    """
    per_chain = [_run_chain(density, config, c, init)
                 for c in range(config.n_chains)]
    names = getattr(density, "param_names",
                    tuple(f"z{i}" for i in range(density.dim)))
    return PosteriorDraws(
        draws=np.stack([d for d, _, _, _ in per_chain]),
        param_names=tuple(names),
        step_size=np.array([e for _, e, _, _ in per_chain]),
        acceptance=np.array([a for _, _, a, _ in per_chain]),
        divergences=np.array([d for _, _, _, d in per_chain], dtype=int),
        config=config,
    )


# ---------------------------------------------------------------------------
# Convergence diagnostics


@dataclass(frozen=True, eq=False)
class Diagnostics:
    """Split R-hat and rank-normalised ESS per parameter."""

    param_names: tuple[str, ...]
    rhat: np.ndarray
    ess: np.ndarray


def split_rhat(x: np.ndarray) -> float:
    """Potential scale reduction over split chains for one parameter.

    Parameters
    ----------
    x : ndarray, shape (n_chains, n_draws)

    Each chain is split in half, so intra-chain drift inflates the
    statistic even with a single starting distribution.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a (n_chains, n_draws) array with >= 2 chains")
    n = x.shape[1] // 2
    if n < 2:
        raise ValueError("need at least 4 draws per chain")
    halves = np.concatenate([x[:, :n], x[:, x.shape[1] - n:]], axis=0)
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within == 0.0:
        return 1.0 if between == 0.0 else np.inf
    var_plus = (n - 1) / n * within + between / n
    return float(np.sqrt(var_plus / within))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain via FFT."""
    n = len(x)
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    acov = np.fft.irfft(f * np.conjugate(f))[:n]
    return acov / n


def ess_rank_normalized(x: np.ndarray) -> float:
    """Effective sample size of one parameter across chains.

    Draws are rank-normalised, then combined with Geyer's initial
    monotone sequence estimate of the autocorrelation time. The result
    is capped at the total number of draws; a constant input has no
    information and reports an ESS of 1.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need a (n_chains, n_draws) array with >= 2 chains")
    m, n = x.shape
    if np.all(x == x.flat[0]):
        return 1.0
    ranks = rankdata(x.ravel()).reshape(m, n)
    z = ndtri((ranks - 0.375) / (m * n + 0.25))

    acov = np.vstack([_autocov(z[i]) for i in range(m)])
    mean_var = float(acov[:, 0].mean()) * n / (n - 1.0)
    var_plus = mean_var * (n - 1.0) / n + float(z.mean(axis=1).var(ddof=1))
    if var_plus == 0.0:
        return 1.0

    rho = np.zeros(n)
    rho[0] = 1.0
    rho[1] = 1.0 - (mean_var - float(acov[:, 1].mean())) / var_plus
    rho_even, rho_odd = rho[0], rho[1]
    t = 1
    while t < n - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (mean_var - float(acov[:, t + 1].mean())) / var_plus
        rho_odd = 1.0 - (mean_var - float(acov[:, t + 2].mean())) / var_plus
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    # Enforce a monotone decreasing sequence of paired sums.
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    tau = -1.0 + 2.0 * float(rho[: max_t + 2].sum())
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(min(m * n / tau, m * n))


def compute_diagnostics(draws: PosteriorDraws) -> Diagnostics:
    """Split R-hat and rank-normalised ESS for every parameter.

    Raises
    ------
    ValueError
        With fewer than 2 chains (between-chain comparison is undefined)
        or fewer than 4 draws per chain.
    """
    x = draws.draws
    if x.shape[0] < 2:
        raise ValueError("diagnostics need at least 2 chains")
    if x.shape[1] < 4:
        raise ValueError("diagnostics need at least 4 draws per chain")
    rhat = np.array([split_rhat(x[:, :, j]) for j in range(x.shape[2])])
    ess = np.array([ess_rank_normalized(x[:, :, j]) for j in range(x.shape[2])])
    return Diagnostics(param_names=draws.param_names, rhat=rhat, ess=ess)
