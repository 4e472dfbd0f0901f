"""Deterministic substream RNG helpers.

Every stochastic component in the library draws from a generator produced
here. Streams are identified by a tuple of nonnegative integers so that
results are independent of worker count and execution order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "stream_seed"]


def stream_seed(*key: int) -> np.random.SeedSequence:
    """Build a SeedSequence for the given integer key tuple."""
    if any(k < 0 for k in key):
        raise ValueError(f"stream key must be nonnegative, got {key}")
    return np.random.SeedSequence(list(key))


def substream(*key: int) -> np.random.Generator:
    """Return a PCG64 generator for the given integer key tuple.

    Identical keys always yield identical streams.
    """
    return np.random.Generator(np.random.PCG64(stream_seed(*key)))
