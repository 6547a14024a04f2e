"""Batch experiment driver.

Subcommands: sample, posterior, invert, approx-score, compile-circuit,
bench-acceptance, demo2d, verify. Every run writes a run_manifest.json
(config hash, seed, library versions) into the output directory, and every
CSV artifact embeds the same config hash in its first line. Configs are flat
key=value files (an INI [run] section) or JSON objects; unknown keys are
rejected. Numeric CSV fields use 17 significant digits.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import rng as prng
from .circuits import OneWayCandidate, candidate_from_text, sign_identity
from .instance import InstanceParams, measurement_matrix, sample_unconditional
from .providers import provider_by_name
from .scores import ScoreProvider

FMT = "%.17g"


# --- config plumbing ------------------------------------------------------------


def load_config(path: str | None) -> dict[str, str]:
    """Flat key=value dict from an INI [run] section or a JSON object."""
    if path is None:
        return {}
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise SystemExit("config error: JSON config must be an object")
        return {str(k): str(v) for k, v in raw.items()}
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if "run" not in cp:
        raise SystemExit("config error: INI config needs a [run] section")
    return dict(cp["run"])


def resolve(schema: dict, cfg: dict[str, str], overrides: list[str]) -> dict:
    """Validate keys against the schema and coerce values.

    schema maps key -> (type, default); default None marks a required key.
    """
    merged = dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise SystemExit(f"config error: override {item!r} is not key=value")
        k, v = item.split("=", 1)
        merged[k.strip()] = v.strip()
    unknown = sorted(set(merged) - set(schema))
    if unknown:
        raise SystemExit(
            f"config error: unknown key(s) {', '.join(unknown)}; "
            f"known: {', '.join(sorted(schema))}"
        )
    out = {}
    for key, (typ, default) in schema.items():
        if key in merged:
            try:
                out[key] = typ(merged[key])
            except (TypeError, ValueError) as e:
                raise SystemExit(f"config error: field {key!r}: {e}") from None
        elif default is None:
            raise SystemExit(f"config error: field {key!r} is required")
        else:
            out[key] = default
    return out


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()


def write_manifest(out: Path, subcommand: str, cfg: dict, seed: int) -> str:
    cfg_text = {k: str(v) for k, v in cfg.items()}
    h = config_hash(cfg_text)
    manifest = {
        "subcommand": subcommand,
        "config": cfg_text,
        "config_hash": h,
        "seed": seed,
        "versions": {
            "phaselab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return h


def write_csv(path: Path, header: list[str], rows, h: str) -> None:
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return FMT % v
        return str(v)

    lines = [f"# config-hash: {h}", ",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, obj: dict, h: str) -> None:
    path.write_text(json.dumps({"config_hash": h, **obj}, indent=2) + "\n")


# --- shared pieces ----------------------------------------------------------------


def instance_schema() -> dict:
    return {
        "d": (int, 8),
        "d_prime": (int, 8),
        "R": (float, 30.0),
        "eps": (float, 1.0),
        "beta": (float, 0.025),
        "beta_max": (float, 0.25),
        "circuit": (str, "identity"),
    }


def build_instance(cfg: dict) -> tuple[InstanceParams, OneWayCandidate]:
    params = InstanceParams(
        cfg["d"], cfg["d_prime"], cfg["R"], cfg["eps"], cfg["beta"], cfg["beta_max"]
    )
    spec = cfg["circuit"]
    if spec == "identity":
        if params.d_prime == 0:
            from .circuits import no_output_candidate

            f = no_output_candidate(params.d)
        else:
            if params.d != params.d_prime:
                raise SystemExit("config error: circuit 'identity' needs d = d_prime")
            f = sign_identity(params.d)
    elif spec.startswith("random:"):
        from .reduction import random_circuit_owf

        parts = spec.split(":")
        if len(parts) != 3:
            raise SystemExit("config error: circuit 'random:<gates>:<seed>'")
        f = random_circuit_owf(params.d, params.d_prime, int(parts[1]), int(parts[2]))
    else:
        f = candidate_from_text(Path(spec).read_text())
        if f.input_len != params.d or f.output_len != params.d_prime:
            raise SystemExit("config error: circuit file arity does not match d, d_prime")
    return params, f


def build_provider(name: str, params: InstanceParams, f: OneWayCandidate) -> ScoreProvider:
    try:
        return provider_by_name(name, params, f)
    except (ValueError, OSError) as e:
        raise SystemExit(f"config error: field 'provider': {e}") from None


def sample_columns(dim: int) -> list[str]:
    return [f"x{j}" for j in range(dim)]


# --- subcommands ------------------------------------------------------------------


def cmd_sample(args) -> int:
    schema = instance_schema() | {
        "count": (int, 1000),
        "method": (str, "direct"),
        "provider": (str, "exact"),
        "steps": (int, 2000),
        "t_min": (float, 1e-4),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "sample", cfg, args.seed)
    params, f = build_instance(cfg)
    rng = prng.stream(args.seed, 0)
    if cfg["method"] == "direct":
        _, x = sample_unconditional(params, f, rng, size=cfg["count"])
    elif cfg["method"] == "diffusion":
        from .diffusion import default_config, reverse_run

        provider = build_provider(cfg["provider"], params, f)
        dcfg = default_config(params, N=cfg["steps"], t_min=cfg["t_min"])
        x = reverse_run(provider, dcfg, rng, dim=params.dim, size=cfg["count"])
    else:
        raise SystemExit("config error: field 'method' must be direct or diffusion")
    write_csv(out / "samples.csv", sample_columns(params.dim), x, h)
    print(f"wrote {cfg['count']} samples to {out / 'samples.csv'}")
    return 0


def cmd_posterior(args) -> int:
    schema = instance_schema() | {
        "sampler": (str, "rejection"),
        "count": (int, 1000),
        "max_rounds": (int, 10**6),
        "provider": (str, "exact"),
        "steps": (int, 2000),
        "t_min": (float, 1e-4),
        "y": (str, "fresh"),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "posterior", cfg, args.seed)
    params, f = build_instance(cfg)
    rng = prng.stream(args.seed, 0)
    if cfg["y"] == "fresh":
        from .reduction import sample_measurement_for_target

        s = rng.choice(np.array([-1, 1]), size=params.d)
        y = sample_measurement_for_target(f(s), params, rng)
    else:
        y = np.array([float(v) for v in cfg["y"].split(",")])
        if y.size != params.d_prime:
            raise SystemExit("config error: field 'y' must have d_prime entries")
    A = measurement_matrix(params)
    info: dict = {"y": [float(v) for v in y], "sampler": cfg["sampler"]}
    if cfg["sampler"] == "rejection":
        from .posterior import PosteriorConfig, rejection_sample_many

        pcfg = PosteriorConfig(cfg["max_rounds"], params.beta)
        proposal = lambda n, r: sample_unconditional(params, f, r, size=n)[1]
        x, total = rejection_sample_many(proposal, A, y, pcfg, rng, count=cfg["count"])
        info["proposals"] = total
        info["rounds_per_accept"] = total / cfg["count"]
    elif cfg["sampler"] == "brute-force":
        from .posterior import brute_force_posterior

        x = brute_force_posterior(params, f, y, rng, size=cfg["count"])
    elif cfg["sampler"] == "heuristic":
        from .diffusion import default_config
        from .posterior import PosteriorConfig, heuristic_posterior_sample

        provider = build_provider(cfg["provider"], params, f)
        dcfg = default_config(params, N=cfg["steps"], t_min=cfg["t_min"])
        pcfg = PosteriorConfig(1, params.beta)
        x = heuristic_posterior_sample(provider, A, y, pcfg, dcfg, rng, size=cfg["count"])
    else:
        raise SystemExit("config error: field 'sampler' must be rejection, brute-force, or heuristic")
    write_csv(out / "posterior.csv", sample_columns(params.dim), x, h)
    write_json(out / "posterior_stats.json", info, h)
    print(f"wrote {cfg['count']} posterior samples to {out / 'posterior.csv'}")
    return 0


def cmd_invert(args) -> int:
    schema = instance_schema() | {
        "sampler": (str, "brute-force"),
        "trials": (int, 200),
        "max_rounds": (int, 10**6),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "invert", cfg, args.seed)
    params, f = build_instance(cfg)
    from .reduction import (
        inversion_experiment,
        make_brute_force_sampler,
        make_heuristic_sampler,
        make_rejection_sampler,
    )

    if cfg["sampler"] == "brute-force":
        sampler = make_brute_force_sampler(params, f)
    elif cfg["sampler"] == "rejection":
        sampler = make_rejection_sampler(params, f, cfg["max_rounds"])
    elif cfg["sampler"] == "heuristic":
        sampler = make_heuristic_sampler(params, f)
    else:
        raise SystemExit("config error: field 'sampler' must be brute-force, rejection, or heuristic")
    rep = inversion_experiment(f, sampler, cfg["trials"], params, args.seed, jobs=args.jobs)
    row = {
        "trials": rep.trials,
        "successes": rep.successes,
        "success_rate": rep.successes / rep.trials,
        "exact_seed_hits": rep.exact_seed_hits,
        "bits_match_count": rep.bits_match_count,
        "no_guess_count": rep.no_guess_count,
    }
    write_json(out / "invert_report.json", row, h)
    write_csv(out / "invert_report.csv", list(row), [list(row.values())], h)
    # wall time is inherently run-dependent, so it lives outside the
    # seed-deterministic report artifact
    write_json(out / "invert_timing.json", {"mean_sampler_nanos": rep.mean_sampler_nanos}, h)
    print(f"success rate {row['success_rate']:.3f} over {rep.trials} trials")
    return 0


def cmd_approx_score(args) -> int:
    from .piecewise import ApproxParams, build_score_approx, measure_l2_error, score_family
    from .relu import compile_piecewise, eval_net, network_to_text, report

    schema = {
        "family": (str, "two_point"),
        "sigma": (float, 1.0),
        "kappa": (float, 0.04),
        "mc_draws": (int, 200_000),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "approx-score", cfg, args.seed)
    try:
        score, sampler, m2, mu = score_family(cfg["family"], cfg["sigma"])
    except ValueError as e:
        raise SystemExit(f"config error: field 'family': {e}") from None
    ap = ApproxParams(cfg["kappa"], cfg["sigma"], m2, mu)
    l = build_score_approx(score, ap)
    (out / "score_approx.csv").write_text(f"# config-hash: {h}\n" + l.to_csv())
    net = compile_piecewise(l)
    (out / "score_net.txt").write_text(f"# config-hash: {h}\n" + network_to_text(net))
    rng = prng.stream(args.seed, 0)
    l2 = measure_l2_error(l, score, sampler, cfg["mc_draws"], rng)
    grid = np.linspace(l.breakpoints[0] - 1, l.breakpoints[-1] + 1, 10_001)
    net_err = float(np.max(np.abs(eval_net(net, grid[:, None])[:, 0] - l(grid))))
    rep = report(net)
    rows = [[
        cfg["family"], cfg["sigma"], cfg["kappa"], l.piece_count, l2,
        l2 * cfg["sigma"] ** 2 / cfg["kappa"], net_err, rep.param_count, rep.max_abs_weight,
    ]]
    write_csv(
        out / "error_table.csv",
        ["family", "sigma", "kappa", "pieces", "l2_error", "scaled_l2", "net_sup_error",
         "param_count", "max_abs_weight"],
        rows,
        h,
    )
    print(f"pieces={l.piece_count} l2={l2:.3e} scaled={l2 * cfg['sigma']**2 / cfg['kappa']:.3f}")
    return 0


def cmd_compile_circuit(args) -> int:
    from .relu import circuit_to_relu, network_to_text, report

    schema = {"circuit": (str, None)}
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "compile-circuit", cfg, args.seed)
    f = candidate_from_text(Path(cfg["circuit"]).read_text())
    net = circuit_to_relu(f)
    rep = report(net)
    (out / "circuit_net.txt").write_text(f"# config-hash: {h}\n" + network_to_text(net))
    write_json(
        out / "param_report.json",
        {"param_count": rep.param_count, "max_abs_weight": rep.max_abs_weight, "depth": rep.depth},
        h,
    )
    print(f"compiled {f.label or 'circuit'}: {rep.param_count} params, depth {rep.depth}")
    return 0


def cmd_bench_acceptance(args) -> int:
    from .posterior import acceptance_curve

    schema = {
        "betas": (str, "0.1,0.2"),
        "ms": (str, "0,1,2,3,4"),
        "trials": (int, 50),
        "R": (float, 30.0),
        "eps": (float, 1.0),
        "max_rounds": (int, 10**7),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "bench-acceptance", cfg, args.seed)
    betas = [float(v) for v in cfg["betas"].split(",")]
    ms = [int(v) for v in cfg["ms"].split(",")]
    rows = acceptance_curve(
        betas, ms, cfg["trials"], args.seed, R=cfg["R"], eps=cfg["eps"],
        max_rounds=cfg["max_rounds"],
    )
    write_csv(
        out / "acceptance.csv",
        ["beta", "m", "mean_rounds", "log_mean_rounds", "trials", "censored"],
        [[r["beta"], r["m"], r["mean_rounds"], r["log_mean_rounds"], r["trials"], r["censored"]]
         for r in rows],
        h,
    )
    print(f"wrote {len(rows)} rows to {out / 'acceptance.csv'}")
    return 0


# --- the 2-D demo -----------------------------------------------------------------

DEMO_MEANS = np.array([[0.0, 0.0], [4.0, 4.0]])
DEMO_VAR = 0.4
DEMO_BETA = 0.9


def demo_prior_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    pick = rng.integers(0, 2, size=n)
    return DEMO_MEANS[pick] + np.sqrt(DEMO_VAR) * rng.standard_normal((n, 2))


def demo_bayes_weight(y: float) -> float:
    """Posterior probability of the (4,4) component given y = x2 + N(0, 0.81)."""
    var = DEMO_VAR + DEMO_BETA**2
    ll = -((y - DEMO_MEANS[:, 1]) ** 2) / (2 * var)
    w = np.exp(ll - ll.max())
    return float(w[1] / w.sum())


def demo_oracle_posterior(y: float, rng: np.random.Generator, n: int) -> np.ndarray:
    """Exact two-component Bayes posterior draws given y."""
    w1 = demo_bayes_weight(y)
    pick = (rng.random(n) < w1).astype(int)
    mu = DEMO_MEANS[pick]
    post_var = 1.0 / (1.0 / DEMO_VAR + 1.0 / DEMO_BETA**2)
    post_mean2 = post_var * (mu[:, 1] / DEMO_VAR + y / DEMO_BETA**2)
    x = np.empty((n, 2))
    x[:, 0] = mu[:, 0] + np.sqrt(DEMO_VAR) * rng.standard_normal(n)
    x[:, 1] = post_mean2 + np.sqrt(post_var) * rng.standard_normal(n)
    return x


def demo_score_provider() -> ScoreProvider:
    def score(sigma, x):
        var = DEMO_VAR + sigma**2
        ll = -np.sum((x[:, None, :] - DEMO_MEANS) ** 2, axis=2) / (2 * var)
        w = np.exp(ll - ll.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)
        return (w @ DEMO_MEANS - x) / var

    return ScoreProvider("demo2d", score, 2)


def cmd_demo2d(args) -> int:
    from .diffusion import DiffusionConfig
    from .posterior import PosteriorConfig, heuristic_posterior_sample, rejection_sample_many

    schema = {
        "count": (int, 2000),
        "steps": (int, 1500),
        "y": (float, 4.0),
        "max_rounds": (int, 10**6),
    }
    cfg = resolve(schema, load_config(args.config), args.overrides)
    out = Path(args.out)
    h = write_manifest(out, "demo2d", cfg, args.seed)
    n, yval = cfg["count"], cfg["y"]
    y = np.array([yval])
    A = np.array([[0.0, 1.0]])
    cols = ["x1", "x2"]

    rng = prng.stream(args.seed, 0)
    prior = demo_prior_sample(rng, n)
    write_csv(out / "prior.csv", cols, prior, h)

    pcfg = PosteriorConfig(cfg["max_rounds"], DEMO_BETA)
    rej, _ = rejection_sample_many(
        lambda k, r: demo_prior_sample(r, k), A, y, pcfg, prng.stream(args.seed, 1), count=n
    )
    write_csv(out / "posterior_rejection.csv", cols, rej, h)

    oracle = demo_oracle_posterior(yval, prng.stream(args.seed, 2), n)
    write_csv(out / "posterior_oracle.csv", cols, oracle, h)

    dcfg = DiffusionConfig(T=10 * (DEMO_VAR + 8.0), t_min=1e-4, N=cfg["steps"])
    heur = heuristic_posterior_sample(
        demo_score_provider(), A, y, pcfg, dcfg, prng.stream(args.seed, 3), size=n
    )
    write_csv(out / "posterior_heuristic.csv", cols, heur, h)

    def upper_weight(x):
        d = np.sum((x[:, None, :] - DEMO_MEANS) ** 2, axis=2)
        return float(np.mean(d[:, 1] < d[:, 0]))

    weights = {
        "y": yval,
        "bayes_weight_upper": demo_bayes_weight(yval),
        "rejection_weight_upper": upper_weight(rej),
        "oracle_weight_upper": upper_weight(oracle),
        "heuristic_weight_upper": upper_weight(heur),
    }
    write_json(out / "component_weights.json", weights, h)
    print(json.dumps(weights, indent=2))
    return 0


# --- verify -----------------------------------------------------------------------


def cmd_verify(args) -> int:
    cfg = resolve({}, load_config(args.config), args.overrides)
    checks: list[tuple[str, bool, str]] = []

    def check(name: str, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as e:  # noqa: BLE001 - verify reports, never crashes
            checks.append((name, False, f"{type(e).__name__}: {e}"))

    def decode_chain():
        from .instance import bits_eps, canonical_params, measure_clipped, round_R

        params = canonical_params(4, 4)
        f = sign_identity(4)
        rng = prng.stream(args.seed, 10)
        s, x = sample_unconditional(params, f, rng, size=20_000)
        y = measure_clipped(x, params, rng)
        z = f(round_R(x[:, :4], params.R))
        assert np.array_equal(z, bits_eps(y, params.eps)), "decode mismatch"

    def series_vs_lattice():
        from .scores import DiscreteGaussianSpec, dg_smoothed_density, dg_smoothed_score

        spec = DiscreteGaussianSpec(0.5, 0.25, 0.3)
        x = np.linspace(-6, 6, 501)
        for fn in (dg_smoothed_density, dg_smoothed_score):
            a = fn(spec, x, method="series")
            b = fn(spec, x, method="lattice")
            assert np.max(np.abs(a - b)) < 1e-10, "series/lattice disagree"

    def piecewise_compile():
        from .piecewise import PiecewiseLinear
        from .relu import compile_piecewise, eval_net

        rng = prng.stream(args.seed, 11)
        bp = np.sort(rng.uniform(-3, 3, size=9))
        l = PiecewiseLinear(bp, rng.uniform(-2, 2, size=9), -1.3, 0.7)
        g = np.linspace(-5, 5, 4001)
        err = np.max(np.abs(eval_net(compile_piecewise(l), g[:, None])[:, 0] - l(g)))
        assert err < 1e-9, f"compile error {err}"

    def circuit_compile():
        from .circuits import all_inputs
        from .reduction import random_circuit_owf
        from .relu import circuit_to_relu, eval_net

        f = random_circuit_owf(6, 4, 12, seed=3)
        S = all_inputs(6)
        assert np.array_equal(eval_net(circuit_to_relu(f), S.astype(float)), f(S))

    def accept_probability():
        from .posterior import PosteriorConfig, rejection_sample

        beta = 0.5
        x0 = np.array([beta * np.sqrt(2 * np.log(2))])
        rng = prng.stream(args.seed, 12)
        cfg_p = PosteriorConfig(1, beta)
        hits = 0
        for _ in range(10_000):
            got, _ = rejection_sample(
                lambda k, r: np.tile(x0, (k, 1)), np.eye(1), np.zeros(1), cfg_p, rng
            )
            hits += got is not None
        assert abs(hits / 10_000 - 0.5) < 0.02, f"acceptance rate {hits / 10_000}"

    def conditional_tv():
        from .diagnostics import conditional_tv_check

        rng = prng.stream(args.seed, 13)
        for _ in range(50):
            p = rng.random((6, 6))
            q = rng.random((6, 6))
            lhs, rhs = conditional_tv_check(p / p.sum(), q / q.sum())
            assert lhs <= rhs + 1e-12

    def manifest_hashes():
        if args.out is None:
            return
        mf = Path(args.out) / "run_manifest.json"
        if not mf.exists():
            return
        data = json.loads(mf.read_text())
        assert config_hash(data["config"]) == data["config_hash"], "manifest hash mismatch"
        for art in Path(args.out).glob("*.csv"):
            first = art.read_text().splitlines()[0]
            assert first == f"# config-hash: {data['config_hash']}", f"{art.name} hash mismatch"

    check("decode-chain", decode_chain)
    check("smoothed-lattice-series", series_vs_lattice)
    check("piecewise-compile-exact", piecewise_compile)
    check("circuit-compile-exact", circuit_compile)
    check("rejection-accept-probability", accept_probability)
    check("conditional-tv-inequality", conditional_tv)
    check("artifact-hashes", manifest_hashes)

    width = max(len(n) for n, _, _ in checks)
    failed = 0
    for name, ok, msg in checks:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {msg}")
        failed += not ok
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    _ = cfg
    return 1 if failed else 0


# --- entry point ------------------------------------------------------------------

COMMANDS = {
    "sample": cmd_sample,
    "posterior": cmd_posterior,
    "invert": cmd_invert,
    "approx-score": cmd_approx_score,
    "compile-circuit": cmd_compile_circuit,
    "bench-acceptance": cmd_bench_acceptance,
    "demo2d": cmd_demo2d,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="phaselab", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI ([run] section) or JSON config file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--jobs", type=int, default=1, help="trial-level parallelism")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("overrides", nargs="*", help="key=value config overrides")
    args = parser.parse_args(argv)
    return COMMANDS[args.subcommand](args)


if __name__ == "__main__":
    sys.exit(main())
