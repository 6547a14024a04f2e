"""Inversion by posterior sampling.

Given a target bit string z, synthesize a measurement y whose law matches the
measurement marginal conditioned on {s : f(s) = z}, run a posterior sampler,
and decode the first block with round_R. Also ships toy one-way-function
candidate constructors (random local circuits, output stretching).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import rng as prng
from .circuits import BooleanCircuit, Gate, OneWayCandidate, all_inputs
from .instance import InstanceParams, bits_eps, round_R, sample_discretized_gaussian


@dataclass(frozen=True)
class InversionReport:
    trials: int
    successes: int  # f(guess) = z
    exact_seed_hits: int  # guess = s
    bits_match_count: int  # Bits_eps(y) = z (extra diagnostic column)
    no_guess_count: int  # sampler failures propagated as no-guess
    mean_sampler_nanos: float

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not (self.exact_seed_hits <= self.successes <= self.trials):
            raise ValueError("inconsistent counts")


def sample_measurement_for_target(
    z: np.ndarray, params: InstanceParams, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """y_j ~ psi_{z_j} + beta*N(0,1), the measurement marginal for targets z."""
    z = np.asarray(z)
    if z.shape[-1] != params.d_prime:
        raise ValueError("target length mismatch")
    n = 1 if size is None else size
    y = np.empty((n, params.d_prime))
    for j in range(params.d_prime):
        y[:, j] = sample_discretized_gaussian(int(z[j]), params.eps, rng, size=n)
    y += params.beta * rng.standard_normal(y.shape)
    return y[0] if size is None else y


def invert(sampler, z: np.ndarray, params: InstanceParams, rng: np.random.Generator):
    """One inversion attempt: guess = round_R(first d coords of a posterior draw).

    sampler(y, rng) may return None (budget exhausted); that propagates as a
    no-guess outcome (None).
    """
    y = sample_measurement_for_target(z, params, rng)
    x = sampler(y, rng)
    if x is None:
        return None, y
    return round_R(np.asarray(x)[: params.d], params.R), y


def inversion_experiment(
    f: OneWayCandidate,
    sampler,
    trials: int,
    params: InstanceParams,
    master_seed: int,
    jobs: int = 1,
) -> InversionReport:
    """Aggregate invert() over i.i.d. targets z = f(uniform s), split streams."""
    if trials < 1:
        raise ValueError("trials must be >= 1")

    def one(i: int):
        r = prng.stream(master_seed, i)
        s = r.choice(np.array([-1, 1]), size=params.d)
        z = f(s)
        t0 = time.perf_counter_ns()
        guess, y = invert(sampler, z, params, r)
        dt = time.perf_counter_ns() - t0
        if guess is None:
            return (False, False, bool(np.array_equal(bits_eps(y, params.eps), z)), True, dt)
        return (
            bool(np.array_equal(f(guess), z)),
            bool(np.array_equal(guess, s)),
            bool(np.array_equal(bits_eps(y, params.eps), z)),
            False,
            dt,
        )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, range(trials)))  # ordered by trial index
    else:
        results = [one(i) for i in range(trials)]
    succ = sum(r[0] for r in results)
    hits = sum(r[1] for r in results)
    bits = sum(r[2] for r in results)
    nog = sum(r[3] for r in results)
    nanos = float(np.mean([r[4] for r in results]))
    return InversionReport(trials, succ, hits, bits, nog, nanos)


def make_brute_force_sampler(params: InstanceParams, f: OneWayCandidate):
    from .posterior import brute_force_posterior

    return lambda y, rng: brute_force_posterior(params, f, y, rng)


def make_rejection_sampler(params: InstanceParams, f: OneWayCandidate, max_rounds: int):
    from .instance import measurement_matrix, sample_unconditional
    from .posterior import PosteriorConfig, rejection_sample

    A = measurement_matrix(params)
    cfg = PosteriorConfig(max_rounds, params.beta)

    def sampler(y, rng):
        proposal = lambda n, r: sample_unconditional(params, f, r, size=n)[1]
        x, _ = rejection_sample(proposal, A, y, cfg, rng)
        return x

    return sampler


def make_heuristic_sampler(params: InstanceParams, f: OneWayCandidate, diffusion_cfg=None):
    from .diffusion import default_config
    from .instance import measurement_matrix
    from .posterior import PosteriorConfig, heuristic_posterior_sample
    from .scores import exact_provider

    A = measurement_matrix(params)
    dcfg = default_config(params) if diffusion_cfg is None else diffusion_cfg
    cfg = PosteriorConfig(1, params.beta)
    provider = exact_provider(params, f)
    return lambda y, rng: heuristic_posterior_sample(provider, A, y, cfg, dcfg, rng)


# --- candidate constructors ---------------------------------------------------


def stretch_owf(f: OneWayCandidate, l: int) -> OneWayCandidate:
    """Change the output length to l.

    l > outputLen: pad with constant +1 outputs. l < outputLen: restricted
    evaluation — inputs beyond n' = max(1, round(n*l/m)) are pinned to +1 and
    only the first l outputs are kept.
    """
    if l < 1:
        raise ValueError("l must be >= 1")
    c = f.circuit
    if l == f.output_len:
        return f
    if l > f.output_len:
        gates = list(c.gates)
        gates.append(Gate("NOT", (0,)))
        not0 = c.n_inputs + len(gates) - 1
        gates.append(Gate("AND", (0, not0)))  # constant False = +1
        const_plus = c.n_inputs + len(gates) - 1
        outs = tuple(c.outputs) + (const_plus,) * (l - f.output_len)
        cc = BooleanCircuit(c.n_inputs, tuple(gates), outs)
        return OneWayCandidate(f.input_len, l, cc, f.label + f"+pad{l}")
    n_keep = max(1, round(f.input_len * l / f.output_len))
    gates = [Gate("NOT", (0,)), Gate("AND", (0, c.n_inputs + 0))]
    const_plus = c.n_inputs + 1
    remap = {i: (i if i < n_keep else const_plus) for i in range(c.n_inputs)}
    for k, g in enumerate(c.gates):
        gates.append(
            Gate(g.kind, tuple(remap.get(r, r + 2) for r in g.inputs))
        )
    outs = tuple(remap.get(r, r + 2) for r in c.outputs[:l])
    cc = BooleanCircuit(c.n_inputs, tuple(gates), outs)
    return OneWayCandidate(f.input_len, l, cc, f.label + f"+trunc{l}")


def random_circuit_owf(n: int, m: int, gate_count: int, seed: int) -> OneWayCandidate:
    """Seed-deterministic local candidate: fan-in <= 3, each output reads <= 8 inputs.

    Each output block builds a small random gate tree over its support and
    finishes with an XOR-of-(input, tree) gadget so outputs are rarely constant.
    """
    if gate_count < m:
        raise ValueError("need at least one gate per output")
    r = np.random.default_rng(seed)
    gates: list[Gate] = []
    outputs = []
    per_out = max(1, gate_count // m)
    for j in range(m):
        support = r.choice(n, size=min(8, n), replace=False)
        block: list[int] = [int(v) for v in support]  # references usable in this block
        for _ in range(per_out):
            kind = ("AND", "OR", "NOT")[int(r.integers(0, 3))]
            fan = 1 if kind == "NOT" else int(r.integers(2, 4))
            refs = tuple(int(block[int(r.integers(0, len(block)))]) for _ in range(fan))
            gates.append(Gate(kind, refs))
            block.append(n + len(gates) - 1)
        t = block[-1]
        a = int(support[int(r.integers(0, len(support)))])
        # XOR(a, t) = OR(AND(a, NOT t), AND(NOT a, t))
        gates.append(Gate("NOT", (t,)))
        nt = n + len(gates) - 1
        gates.append(Gate("NOT", (a,)))
        na = n + len(gates) - 1
        gates.append(Gate("AND", (a, nt)))
        g1 = n + len(gates) - 1
        gates.append(Gate("AND", (na, t)))
        g2 = n + len(gates) - 1
        gates.append(Gate("OR", (g1, g2)))
        outputs.append(n + len(gates) - 1)
    c = BooleanCircuit(n, tuple(gates), tuple(outputs))
    return OneWayCandidate(n, m, c, f"random-{n}to{m}-seed{seed}")


def brute_force_preimages(f: OneWayCandidate, z: np.ndarray) -> np.ndarray:
    """All seeds s with f(s) = z, by 2^n enumeration (n <= 20)."""
    if f.input_len > 20:
        raise ValueError("enumeration limited to n <= 20")
    S = all_inputs(f.input_len)
    out = f(S)
    return S[np.all(out == np.asarray(z), axis=1)]
