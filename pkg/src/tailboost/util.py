"""Small shared helpers: seeded RNG streams and ragged-array indexing."""

import numpy as np


def rng_from(*keys: int) -> np.random.Generator:
    """Deterministic generator derived from a path of non-negative integers.

    Streams for (seed, b) and (seed, b') are independent, so work items can
    run in any order (or in parallel) without changing results.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def ragged_arange(counts: np.ndarray) -> np.ndarray:
    """Concatenated [0..c) ranges for each count in ``counts``."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.cumsum(counts) - counts
    return np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
