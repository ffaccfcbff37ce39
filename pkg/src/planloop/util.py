"""Small shared helpers: stable hashing and derived RNG streams."""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash64(*parts: object) -> int:
    """Platform-independent 64-bit hash of the string forms of `parts`."""
    text = "\x1f".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def rng_stream(seed: int, *parts: object) -> np.random.Generator:
    """Deterministic RNG derived from a base seed plus a stream label.

    Derived streams let phases (and resumed runs) draw identical numbers
    without threading generator state through the whole pipeline.
    """
    return np.random.Generator(np.random.PCG64(stable_hash64(seed, *parts)))
