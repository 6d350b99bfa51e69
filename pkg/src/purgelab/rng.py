"""Seeded randomness.

Every random draw in the package goes through :func:`generator`, which wraps
numpy's PCG64 bit generator (O'Neill's permuted congruential generator,
128-bit state, 64-bit output). Derived seeds are produced by
:func:`derive_seed`, a BLAKE2b digest of the components truncated to 64 bits,
so a seed for (master, dataset, repeat, fold, condition) is stable across
runs, processes and schedules.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def derive_seed(*parts) -> int:
    """Mix arbitrary str/int parts into one unsigned 64-bit seed."""
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
