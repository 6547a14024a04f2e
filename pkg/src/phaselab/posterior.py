"""Posterior samplers for y = Ax + beta*N(0, I).

Three samplers: rejection sampling from any unconditional proposal (accept
with probability exp(-||Ax-y||^2/(2 beta^2))), an exact brute-force oracle
that enumerates the seed posterior (d <= 12), and a guided-diffusion
heuristic baseline with no correctness contract.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .circuits import OneWayCandidate, all_inputs
from .diffusion import DiffusionConfig, reverse_run
from .instance import (
    InstanceParams,
    lattice_atoms,
    operator_norm_power_iteration,
    phase_of_bit,
)
from .scores import ScoreProvider


@dataclass(frozen=True)
class PosteriorConfig:
    max_rounds: int
    beta: float

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class SamplerStats:
    rounds: int
    accepted: bool
    acceptance_rate_estimate: float
    wall_nanos: int


def _check_A(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if operator_norm_power_iteration(A) > 1.0 + 1e-9:
        raise ValueError("measurement matrix must have operator norm <= 1")
    return A


def rejection_sample(
    proposal,
    A: np.ndarray,
    y: np.ndarray,
    cfg: PosteriorConfig,
    rng: np.random.Generator,
    chunk: int = 1024,
):
    """Accept a proposal draw x with probability exp(-||Ax-y||^2/(2 beta^2)).

    proposal(n, rng) must return (n, dim) unconditional draws. Returns
    (x or None, SamplerStats); exhausting the round budget is a reported
    outcome, not an error.
    """
    A = _check_A(A)
    y = np.asarray(y, dtype=float)
    t0 = time.perf_counter_ns()
    done = 0
    while done < cfg.max_rounds:
        n = min(chunk, cfg.max_rounds - done)
        x = np.asarray(proposal(n, rng), dtype=float)
        resid = x @ A.T - y
        logq = -np.sum(resid**2, axis=1) / (2.0 * cfg.beta**2)
        acc = np.log(rng.random(n)) < logq
        hit = int(np.argmax(acc)) if acc.any() else -1
        if hit >= 0:
            rounds = done + hit + 1
            stats = SamplerStats(rounds, True, 1.0 / rounds, time.perf_counter_ns() - t0)
            return x[hit], stats
        done += n
    stats = SamplerStats(cfg.max_rounds, False, 0.0, time.perf_counter_ns() - t0)
    return None, stats


def rejection_sample_many(
    proposal,
    A: np.ndarray,
    y: np.ndarray,
    cfg: PosteriorConfig,
    rng: np.random.Generator,
    count: int,
    chunk: int = 65536,
):
    """Collect `count` accepted draws; returns (samples, total_proposals).

    The per-sample budget applies to the whole batch: raises RuntimeError if
    count*max_rounds proposals are exhausted first.
    """
    A = _check_A(A)
    y = np.asarray(y, dtype=float)
    out = []
    got = 0
    total = 0
    budget = count * cfg.max_rounds
    while got < count:
        if total >= budget:
            raise RuntimeError("rejection budget exhausted")
        n = min(chunk, budget - total)
        x = np.asarray(proposal(n, rng), dtype=float)
        resid = x @ A.T - y
        logq = -np.sum(resid**2, axis=1) / (2.0 * cfg.beta**2)
        acc = np.log(rng.random(n)) < logq
        total += n
        if acc.any():
            out.append(x[acc])
            got += int(acc.sum())
    samples = np.concatenate(out, axis=0)[:count]
    return samples, total


def seed_posterior_log_weights(
    params: InstanceParams, f: OneWayCandidate, y: np.ndarray
) -> np.ndarray:
    """log w_s over all 2^d seeds: w_s ∝ prod_j (psi_{f(s)_j} * N(0, beta^2))(y_j)."""
    if params.d > 12:
        raise ValueError("brute force limited to d <= 12")
    y = np.asarray(y, dtype=float)
    from .scores import DiscreteGaussianSpec, dg_smoothed_log_density

    ld = np.empty((2, params.d_prime))
    for row, b in enumerate((1, -1)):
        spec = DiscreteGaussianSpec(params.eps, phase_of_bit(b, params.eps), params.beta)
        ld[row] = dg_smoothed_log_density(spec, y)
    F = f(all_inputs(params.d))
    idx = ((1 - F) // 2).astype(np.intp)  # (2^d, d_prime)
    logw = ld[idx, np.arange(params.d_prime)].sum(axis=1)
    return logw - logsumexp(logw)


def _tail_posterior_draws(
    eps: float, phase: float, beta: float, y: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Exact lattice-posterior draws of the tail coordinate given y (one per y)."""
    pts, p = lattice_atoms(eps, phase)
    logpost = np.log(p)[None, :] - (y[:, None] - pts[None, :]) ** 2 / (2.0 * beta**2)
    logpost -= logpost.max(axis=1, keepdims=True)
    w = np.exp(logpost)
    w /= w.sum(axis=1, keepdims=True)
    cdf = np.cumsum(w, axis=1)
    u = rng.random(y.shape[0])
    idx = (u[:, None] > cdf).sum(axis=1)
    return pts[idx]


def brute_force_posterior(
    params: InstanceParams,
    f: OneWayCandidate,
    y: np.ndarray,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Exact posterior draws given y under A = (0 | I).

    Seeds are drawn from the enumerated seed posterior; the first block is
    N(R s, I) (independent of y); tail coordinates come from the exact
    discrete lattice posterior given y.
    """
    if params.beta <= 0:
        raise ValueError("posterior requires beta > 0")
    n = 1 if size is None else size
    logw = seed_posterior_log_weights(params, f, y)
    seeds = all_inputs(params.d)
    pick = rng.choice(seeds.shape[0], size=n, p=np.exp(logw))
    s = seeds[pick]
    x = np.empty((n, params.dim))
    x[:, : params.d] = params.R * s + rng.standard_normal((n, params.d))
    bits = f(s)
    y = np.asarray(y, dtype=float)
    for j in range(params.d_prime):
        for b in (1, -1):
            mask = bits[:, j] == b
            if mask.any():
                yy = np.full(int(mask.sum()), y[j])
                x[mask, params.d + j] = _tail_posterior_draws(
                    params.eps, phase_of_bit(b, params.eps), params.beta, yy, rng
                )
    return x[0] if size is None else x


def heuristic_posterior_sample(
    provider: ScoreProvider,
    A: np.ndarray,
    y: np.ndarray,
    cfg: PosteriorConfig,
    diffusion_cfg: DiffusionConfig,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Guided reverse diffusion: adds the Gaussian-likelihood gradient
    -A^T(Ax - y)/(beta^2 + t) to the score at each step. Baseline only."""
    A = _check_A(A)
    y = np.asarray(y, dtype=float)

    def guidance(t, x):
        return -(x @ A.T - y) @ A / (cfg.beta**2 + t)

    return reverse_run(
        provider, diffusion_cfg, rng, dim=A.shape[1], size=size, extra_drift=guidance
    )


def acceptance_curve(
    betas,
    ms,
    trials: int,
    master_seed: int,
    R: float = 30.0,
    eps: float = 1.0,
    max_rounds: int = 10**7,
):
    """Mean rounds-to-accept of rejection sampling vs measurement count m.

    For each (beta, m): a d=m, dPrime=m instance with the sign-identity map,
    exact-direct proposal, fresh target y per trial. Returns a list of dict
    rows; censored trials (budget hit) count as max_rounds rounds.
    """
    from . import rng as prng
    from .circuits import sign_identity
    from .instance import measurement_matrix, sample_unconditional
    from .reduction import sample_measurement_for_target

    rows = []
    sid = 0  # stream counter: one independent stream per (beta, m, trial)
    for beta in betas:
        for m in ms:
            if m == 0:
                rows.append(
                    {"beta": beta, "m": 0, "mean_rounds": 1.0, "log_mean_rounds": 0.0,
                     "trials": trials, "censored": 0}
                )
                continue
            params = InstanceParams(m, m, R, eps, beta, eps / 4)
            f = sign_identity(m)
            A = measurement_matrix(params)
            cfg = PosteriorConfig(max_rounds, beta)
            counts = np.empty(trials)
            censored = 0
            for t in range(trials):
                r = prng.stream(master_seed, sid)
                sid += 1
                s = r.choice(np.array([-1, 1]), size=m)
                y = sample_measurement_for_target(f(s), params, r)
                proposal = lambda n, rr: sample_unconditional(params, f, rr, size=n)[1]
                _, stats = rejection_sample(proposal, A, y, cfg, r, chunk=4096)
                counts[t] = stats.rounds
                censored += 0 if stats.accepted else 1
            rows.append(
                {
                    "beta": beta,
                    "m": m,
                    "mean_rounds": float(counts.mean()),
                    "log_mean_rounds": float(np.log(counts.mean())),
                    "trials": trials,
                    "censored": censored,
                }
            )
    return rows
