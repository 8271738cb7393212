"""Deterministic seed derivation for replications and named sub-streams.

Every random quantity in the package descends from a 64-bit master seed
through `derive_seed` / `substream_seed`, so any replication (or any single
rejection-sampling attempt) can be reproduced in isolation.  The mixing
function is SplitMix64's finalizer; test vectors are frozen in
``tests/test_harness.py`` and listed in the README so an independent
implementation can match the streams.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# Role tags for the independent sub-streams of one replication.
TRAJECTORY_STREAM = 1
REGRET_STREAM = 2
INFERENCE_STREAM = 3


def mix64(value: int) -> int:
    """SplitMix64 finalizer: a 64-bit avalanche permutation."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, index: int) -> int:
    """Seed for replication `index`: mix64(master + (index+1) * golden_gamma)."""
    if index < 0:
        raise ValueError("index must be nonnegative")
    return mix64((master_seed + (index + 1) * _GOLDEN) & _MASK64)


def substream_seed(seed: int, tag: int) -> int:
    """Seed for a named sub-stream: mix64(seed XOR mix64(tag))."""
    return mix64((seed ^ mix64(tag)) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
