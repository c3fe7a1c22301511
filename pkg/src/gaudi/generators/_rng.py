"""Seeded substreams: every sample/simulation gets an independent generator."""

import numpy as np


def substream(seed, *key):
    """Generator for (seed, *key); independent across keys, reproducible."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *[int(k) for k in key]])
