"""Seedable counter-based random streams.

All stochastic code draws from Philox generators keyed by a base seed plus an
integer spawn key, so any cell of a batch (episode index, theta index,
replicate index, ...) gets its own stream regardless of scheduling order.
"""

from __future__ import annotations

import numpy as np


def stream(base_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (base_seed, key...)."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
