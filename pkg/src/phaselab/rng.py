"""Deterministic random-stream management.

Every operation in the package takes an explicit numpy Generator. Parallel or
repeated trials derive independent streams from a single master seed with
`stream(master, index)`; the stream id is the trial index, so results are
reproducible regardless of scheduling order.
"""

from __future__ import annotations

import numpy as np


def stream(master_seed: int, index: int = 0) -> np.random.Generator:
    """Return the generator for sub-stream `index` of `master_seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))
