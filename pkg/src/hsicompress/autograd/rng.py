"""Seeded random streams.

All randomness goes through numpy's PCG64 generator (64-bit output, 128-bit
state), which produces the same sequence for the same seed on every
platform. Independent sub-streams are derived with ``SeedSequence.spawn`` so
that adding a consumer never perturbs another consumer's draws.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def derive(seed: int, *keys: int | str) -> np.random.Generator:
    """A stream keyed by ``(seed, *keys)``; string keys are hashed stably."""
    words = [int(seed)]
    for key in keys:
        if isinstance(key, str):
            words.extend(key.encode("utf-8"))
            words.append(0xFF)
        else:
            words.append(int(key))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
