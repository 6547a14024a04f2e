"""Exact sigma-smoothed densities and scores for the lattice-mixture family.

Two independent routes are implemented for the smoothed discretized Gaussian:
a truncated Fourier (Poisson-summation) series and a direct lattice
convolution sum. They must agree to 1e-10 relative; tests enforce this.
All mixture computations run in log-space via log-sum-exp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .circuits import OneWayCandidate, all_inputs
from .instance import InstanceParams, LATTICE_EXTENT, lattice_atoms, phase_of_bit

_LOG_CUTOFF = -700.0  # densities below e^-700 are reported as -inf log-density

# Smallest J with exp(-J^2 rho^2 / (2 eps^2 (1+rho^2))) < 1e-18. This is far
# more conservative than the true series decay exp(-2 pi^2 j^2 rho^2/(eps^2 v)).
_SERIES_LOG_CUT = 18.0 * np.log(10.0)


@dataclass(frozen=True)
class DiscreteGaussianSpec:
    """Unit Gaussian on the lattice {k*eps + phase}, smoothed by N(0, rho^2)."""

    eps: float
    phase: float
    rho: float

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.phase not in (0.0, self.eps / 2.0):
            raise ValueError("phase must be 0 or eps/2")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")


def gaussian_smoothed_score(mu: float, base_var: float, sigma: float, x):
    """Score of N(mu, base_var) smoothed by N(0, sigma^2): -(x-mu)/(base_var+sigma^2)."""
    v = base_var + sigma**2
    if v <= 0:
        raise ValueError("base_var + sigma^2 must be positive")
    return -(np.asarray(x, dtype=float) - mu) / v


def _series_coeffs(spec: DiscreteGaussianSpec):
    """Nonzero-frequency coefficients a_j and angular frequencies 2*pi*j/eps."""
    v = 1.0 + spec.rho**2
    J = int(np.ceil(spec.eps * np.sqrt(2.0 * v * _SERIES_LOG_CUT) / spec.rho))
    j = np.arange(1, J + 1, dtype=float)
    a = np.exp(-2.0 * np.pi**2 * j**2 * spec.rho**2 / (spec.eps**2 * v))
    return a, 2.0 * np.pi * j / spec.eps


def _lattice_normalizer_series(eps: float, phase: float) -> float:
    """eps * sum_k w1(k*eps + phase), by Poisson summation (exact to 1e-40 terms)."""
    z = 1.0
    j = 1
    while j <= 400:
        b = np.exp(-2.0 * np.pi**2 * j**2 / eps**2)
        if b < 1e-40:
            break
        z += 2.0 * b * np.cos(2.0 * np.pi * j * phase / eps)
        j += 1
    return z


def _series_T(spec: DiscreteGaussianSpec, x: np.ndarray):
    """Oscillatory factor T(x) and its derivative, with g = w_sqrt(v) * T / Ztilde."""
    v = 1.0 + spec.rho**2
    a, freq = _series_coeffs(spec)
    arg = np.multiply.outer(np.asarray(x, dtype=float) / v - spec.phase, freq)
    T = 1.0 + 2.0 * (np.cos(arg) @ a)
    Tp = -2.0 * (np.sin(arg) @ (a * freq / v))
    return T, Tp


def _dg_series_log_density(spec: DiscreteGaussianSpec, x: np.ndarray):
    v = 1.0 + spec.rho**2
    T, _ = _series_T(spec, x)
    z = _lattice_normalizer_series(spec.eps, spec.phase)
    base = -np.asarray(x, dtype=float) ** 2 / (2.0 * v) - 0.5 * np.log(2.0 * np.pi * v)
    with np.errstate(divide="ignore"):
        out = base + np.log(np.maximum(T, 0.0)) - np.log(z)
    return np.where(out < _LOG_CUTOFF, -np.inf, out)


def _dg_series_score(spec: DiscreteGaussianSpec, x: np.ndarray):
    v = 1.0 + spec.rho**2
    T, Tp = _series_T(spec, x)
    return -np.asarray(x, dtype=float) / v + Tp / np.maximum(T, 1e-300)


def _dg_lattice_parts(spec: DiscreteGaussianSpec, x: np.ndarray):
    """(log density, score) by direct convolution over atoms |t| <= 12 + 8 rho."""
    pts, p = lattice_atoms(spec.eps, spec.phase, extent=LATTICE_EXTENT + 8.0 * spec.rho)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    logd = np.empty(flat.shape)
    score = np.empty(flat.shape)
    logp = np.log(p)
    rho2 = spec.rho**2
    chunk = max(1, int(2**22 // len(pts)))
    for lo in range(0, flat.size, chunk):
        xs = flat[lo : lo + chunk, None]
        diff = xs - pts[None, :]
        lg = logp[None, :] - diff**2 / (2.0 * rho2)
        m = lg.max(axis=1, keepdims=True)
        w = np.exp(lg - m)
        tot = w.sum(axis=1)
        logd[lo : lo + chunk] = m[:, 0] + np.log(tot) - 0.5 * np.log(2.0 * np.pi * rho2)
        score[lo : lo + chunk] = (w @ (pts / rho2) - (w.sum(axis=1)) * xs[:, 0] / rho2) / tot
    logd = np.where(logd < _LOG_CUTOFF, -np.inf, logd)
    return logd.reshape(x.shape), score.reshape(x.shape)


def _resolve_method(spec: DiscreteGaussianSpec, method: str) -> str:
    """'auto' picks the numerically safe route for the given smoothing.

    At rho << eps the Fourier series suffers catastrophic cancellation between
    atoms (the true density there underflows the series' roundoff floor), so
    small smoothing uses the direct lattice convolution.
    """
    if method == "auto":
        return "lattice" if spec.rho < 0.35 * spec.eps else "series"
    if method in ("series", "lattice"):
        return method
    raise ValueError(f"unknown method {method!r}")


def dg_smoothed_log_density(spec: DiscreteGaussianSpec, x, method: str = "auto"):
    if spec.rho == 0:
        raise ValueError("rho = 0 is atomic; no density")
    x = np.asarray(x, dtype=float)
    if _resolve_method(spec, method) == "series":
        return _dg_series_log_density(spec, x)
    return _dg_lattice_parts(spec, x)[0]


def dg_smoothed_density(spec: DiscreteGaussianSpec, x, method: str = "auto"):
    return np.exp(dg_smoothed_log_density(spec, x, method=method))


def dg_smoothed_score(spec: DiscreteGaussianSpec, x, method: str = "auto"):
    if spec.rho == 0:
        raise ValueError("rho = 0 is atomic (unsmoothed); score undefined")
    x = np.asarray(x, dtype=float)
    if _resolve_method(spec, method) == "series":
        return _dg_series_score(spec, x)
    return _dg_lattice_parts(spec, x)[1]


def _tail_phase_parts(params: InstanceParams, sigma: float, x_tail: np.ndarray):
    """Per tail coordinate: log density and score for both phases.

    Returns (logd, sc) of shape (2,) + x_tail.shape, index 0 = bit +1, 1 = bit -1.
    """
    out_ld = np.empty((2,) + x_tail.shape)
    out_sc = np.empty((2,) + x_tail.shape)
    for row, b in enumerate((1, -1)):
        spec = DiscreteGaussianSpec(params.eps, phase_of_bit(b, params.eps), sigma)
        out_ld[row] = dg_smoothed_log_density(spec, x_tail)
        out_sc[row] = dg_smoothed_score(spec, x_tail)
    return out_ld, out_sc


def component_score(
    s: np.ndarray, params: InstanceParams, f: OneWayCandidate, sigma: float, x
) -> np.ndarray:
    """Score of the seed-s product component smoothed by N(0, sigma^2 I)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.dim:
        raise ValueError("dimension mismatch")
    s = np.asarray(s)
    out = np.empty_like(x)
    v = 1.0 + sigma**2
    out[..., : params.d] = -(x[..., : params.d] - params.R * s) / v
    bits = f(s)
    for j in range(params.d_prime):
        spec = DiscreteGaussianSpec(params.eps, phase_of_bit(int(bits[j]), params.eps), sigma)
        out[..., params.d + j] = dg_smoothed_score(spec, x[..., params.d + j])
    return out


def mixture_score_exact(
    params: InstanceParams,
    f: OneWayCandidate,
    sigma: float,
    x,
    return_log_density: bool = False,
):
    """Exact score of the smoothed uniform seed mixture (cost 2^d; d <= 12)."""
    if params.d > 12:
        raise ValueError("exact mixture score limited to d <= 12")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[-1] != params.dim:
        raise ValueError("dimension mismatch")

    S = all_inputs(params.d).astype(float)  # (2^d, d)
    F = f(all_inputs(params.d))  # (2^d, d_prime)
    F_idx = ((1 - F) // 2).astype(np.intp)  # 0 for +1, 1 for -1
    v = 1.0 + sigma**2
    n = X.shape[0]

    head = X[:, : params.d]
    tail = X[:, params.d :]
    ld_ph, sc_ph = _tail_phase_parts(params, sigma, tail)  # (2, n, d_prime)

    loglik = np.empty((n, S.shape[0]))
    # head block: sum_i log N(x_i; R s_i, v)
    diff = head[:, None, :] - params.R * S[None, :, :]  # (n, 2^d, d)
    loglik[:] = -(diff**2).sum(axis=2) / (2.0 * v) - params.d * 0.5 * np.log(2.0 * np.pi * v)
    # tail block: per seed, pick the phase of f(s)_j
    for j in range(params.d_prime):
        loglik += ld_ph[F_idx[:, j], :, j].T  # (n, 2^d)

    log_mix = logsumexp(loglik, axis=1) - params.d * np.log(2.0)
    w = np.exp(loglik - loglik.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)

    out = np.empty_like(X)
    out[:, : params.d] = (-head + params.R * (w @ S)) / v
    for j in range(params.d_prime):
        w_plus = w @ (F[:, j] == 1).astype(float)
        out[:, params.d + j] = w_plus * sc_ph[0, :, j] + (1.0 - w_plus) * sc_ph[1, :, j]

    if single:
        out, log_mix = out[0], log_mix[0]
    return (out, log_mix) if return_log_density else out


def orthant_score(
    params: InstanceParams, f: OneWayCandidate, sigma: float, x
) -> np.ndarray:
    """Small-sigma surrogate: the component score of the sign orthant containing x."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    r = np.where(X[:, : params.d] >= 0, 1, -1).astype(np.int64)
    bits = f(r)  # (n, d_prime)
    v = 1.0 + sigma**2
    out = np.empty_like(X)
    out[:, : params.d] = -(X[:, : params.d] - params.R * r) / v
    ld_ph, sc_ph = _tail_phase_parts(params, sigma, X[:, params.d :])
    idx = ((1 - bits) // 2).astype(np.intp)
    for j in range(params.d_prime):
        out[:, params.d + j] = sc_ph[idx[:, j], np.arange(X.shape[0]), j]
    return out[0] if single else out


def two_point_score(R: float, sigma: float, x, base_var: float = 1.0):
    """Score of 0.5 N(-R, base_var) + 0.5 N(R, base_var) smoothed by N(0, sigma^2)."""
    v = base_var + sigma**2
    x = np.asarray(x, dtype=float)
    w = expit(2.0 * R * x / v)  # posterior weight of the +R component
    return -(x - R * (2.0 * w - 1.0)) / v


def two_point_log_density(R: float, sigma: float, x, base_var: float = 1.0):
    v = base_var + sigma**2
    x = np.asarray(x, dtype=float)
    la = -((x - R) ** 2) / (2 * v)
    lb = -((x + R) ** 2) / (2 * v)
    return np.logaddexp(la, lb) - np.log(2.0) - 0.5 * np.log(2.0 * np.pi * v)


def large_sigma_score(params: InstanceParams, sigma: float, x) -> np.ndarray:
    """Gaussian-mixture surrogate: two-point mixture per head coordinate, -x/(1+sigma^2) tail."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    out[..., : params.d] = two_point_score(params.R, sigma, x[..., : params.d])
    out[..., params.d :] = -x[..., params.d :] / (1.0 + sigma**2)
    return out


class ScoreProvider:
    """A named (sigma, x) -> score map; x is (n, dim) or (dim,)."""

    def __init__(self, label: str, fn, dim: int | None = None):
        self.label = label
        self._fn = fn
        self.dim = dim

    def __call__(self, sigma: float, x):
        out = np.asarray(self._fn(sigma, np.asarray(x, dtype=float)))
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"provider {self.label!r} produced non-finite score")
        return out


def exact_provider(params: InstanceParams, f: OneWayCandidate) -> ScoreProvider:
    return ScoreProvider("exact", lambda s, x: mixture_score_exact(params, f, s, x), params.dim)


def orthant_provider(params: InstanceParams, f: OneWayCandidate) -> ScoreProvider:
    return ScoreProvider("orthant", lambda s, x: orthant_score(params, f, s, x), params.dim)


def large_sigma_provider(params: InstanceParams) -> ScoreProvider:
    return ScoreProvider("large-sigma", lambda s, x: large_sigma_score(params, s, x), params.dim)
