"""Score providers addressable by name.

Names: ``exact``, ``orthant``, ``large-sigma``, ``relu:<file>``,
``piecewise:<file>``. The file-backed providers are frozen objects: a network
or piecewise function built at one smoothing level evaluates the same way at
every requested sigma, so use them only at the sigma they were built for.
"""

from __future__ import annotations

from .circuits import OneWayCandidate
from .instance import InstanceParams
from .scores import ScoreProvider, exact_provider, large_sigma_provider, orthant_provider

PROVIDER_NAMES = ("exact", "orthant", "large-sigma", "relu:<file>", "piecewise:<file>")


def relu_file_provider(path: str) -> ScoreProvider:
    from .relu import eval_net, network_from_text

    with open(path) as fh:
        net = network_from_text(fh.read())
    return ScoreProvider(f"relu:{path}", lambda sigma, x: eval_net(net, x), net.input_dim)


def piecewise_file_provider(path: str) -> ScoreProvider:
    """Coordinatewise application of a serialized 1-D piecewise-linear score."""
    from .piecewise import PiecewiseLinear

    with open(path) as fh:
        pl = PiecewiseLinear.from_csv(fh.read())
    return ScoreProvider(f"piecewise:{path}", lambda sigma, x: pl(x), None)


def provider_by_name(
    name: str, params: InstanceParams | None = None, f: OneWayCandidate | None = None
) -> ScoreProvider:
    if name == "exact":
        if params is None or f is None:
            raise ValueError("provider 'exact' needs instance parameters and a candidate")
        return exact_provider(params, f)
    if name == "orthant":
        if params is None or f is None:
            raise ValueError("provider 'orthant' needs instance parameters and a candidate")
        return orthant_provider(params, f)
    if name == "large-sigma":
        if params is None:
            raise ValueError("provider 'large-sigma' needs instance parameters")
        return large_sigma_provider(params)
    if name.startswith("relu:"):
        return relu_file_provider(name[5:])
    if name.startswith("piecewise:"):
        return piecewise_file_provider(name[10:])
    raise ValueError(f"unknown provider {name!r}; known: {', '.join(PROVIDER_NAMES)}")
