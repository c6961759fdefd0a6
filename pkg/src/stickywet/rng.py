"""Replica seeding and counter-based random streams.

Each replica owns a Philox-4x64 generator keyed by
``derive_replica_seed(master, index)``.  Philox keys select disjoint
streams, so replicas never share draws regardless of scheduling.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15  # odd, so index -> master + gamma*(index+1) is injective mod 2^64
MIX_C1 = 0xBF58476D1CE4E5B9
MIX_C2 = 0x94D049BB133111EB


def splitmix64(x: int) -> int:
    """SplitMix64 finaliser; a bijection on 64-bit integers."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * MIX_C1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_C2) & MASK64
    return z ^ (z >> 31)


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed


def derive_replica_seed(master_seed: int, replica_index: int) -> int:
    """Injective map ``(master, index) -> u64`` for a fixed master seed."""
    master_seed = check_seed(master_seed)
    if replica_index < 0:
        raise ValueError("replica index must be non-negative")
    return splitmix64(master_seed + GOLDEN_GAMMA * (replica_index + 1))


def replica_generator(master_seed: int, replica_index: int) -> np.random.Generator:
    """Stream used by the dynamics of one replica."""
    return np.random.Generator(np.random.Philox(key=derive_replica_seed(master_seed, replica_index)))


def sampler_generator(master_seed: int, replica_index: int) -> np.random.Generator:
    """Stream for the warm-start sampler of one replica, jumped past the dynamics stream."""
    bg = np.random.Philox(key=derive_replica_seed(master_seed, replica_index))
    return np.random.Generator(bg.jumped())


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a u64 seed or None (fixed seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(key=check_seed(0 if rng is None else rng)))
