"""Seeded, counter-based random number generation.

Every stochastic component takes an explicit generator (or an integer seed
from which one is derived); nothing touches numpy's global RNG state, so
runs are reproducible regardless of call order or parallelism.
"""

from __future__ import annotations

import hashlib

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Generator backed by the counter-based Philox bit stream."""
    return np.random.Generator(np.random.Philox(seed))


def spawn(seed: int, *keys: int) -> np.random.Generator:
    """Independent stream for (seed, keys...), stable across runs and platforms.

    Used to hand deterministic sub-streams to components (per-frame noise,
    per-member init, ...) without them sharing or advancing a common state.
    The tuple is hashed down to Philox's 128-bit key.
    """
    digest = hashlib.sha256(repr((seed, *keys)).encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
