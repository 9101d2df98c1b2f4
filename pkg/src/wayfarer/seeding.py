"""Deterministic RNG streams.

Every stochastic component draws from its own counter-based stream so that
adding a consumer never shifts the draws seen by another. Streams are keyed
by (seed, domain, index) through SeedSequence spawning.
"""
from __future__ import annotations

import numpy as np

# Domain tags. Values are arbitrary but frozen: changing one changes every
# stream derived from it.
TERRAIN = 1
SIGNATURE = 2
TRAPS = 3
POLICY = 4
INIT = 5
SAMPLER = 6
TRAIN = 7
GPS = 8
CORRUPT = 9
EXPLORE = 10
EVAL = 11


def stream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Return the generator for one (seed, domain, index) cell."""
    return np.random.default_rng(np.random.SeedSequence((seed, domain, index)))
