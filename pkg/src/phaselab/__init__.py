"""Lattice-phase sampling laboratory.

A small laboratory around a family of Gaussian/lattice mixtures whose
unconditional law is easy to sample but whose measurement posterior encodes a
Boolean function: exact scores, piecewise-linear and ReLU score compilers,
diffusion and posterior samplers, and an inversion harness.
"""

__version__ = "0.1.0"

from .instance import InstanceParams, canonical_params
from .scores import ScoreProvider

__all__ = ["InstanceParams", "ScoreProvider", "canonical_params", "__version__"]
