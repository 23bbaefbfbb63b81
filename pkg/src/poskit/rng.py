"""Seeded, splittable random-number streams.

All stochastic code in the package draws from Philox-4x64-10 counter-based
generators. Stream ``i`` under master seed ``s`` uses the 256-bit Philox key

    key = (s mod 2**64) + i * 2**64

so any port that can seed Philox by key reproduces every stream exactly.
Distinct stream indices give statistically independent sequences.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Generator for the ``stream_id``-th independent stream under ``seed``."""
    if stream_id < 0:
        raise ValueError("stream_id must be nonnegative")
    key = (int(seed) & _MASK64) + (int(stream_id) << 64)
    return np.random.Generator(np.random.Philox(key=key))
