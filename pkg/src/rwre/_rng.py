"""Seeded, splittable random streams.

Every randomized operation draws from a PCG64 generator whose seed
sequence is built from the user seed and a short operation tag, so two
operations sharing a seed never share random numbers.
"""

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def seed_sequence(seed, tag: str) -> np.random.SeedSequence:
    """Seed sequence for the stream identified by ``(seed, tag)``."""
    if isinstance(seed, np.random.SeedSequence):
        base = seed
        return np.random.SeedSequence(
            base.entropy, spawn_key=tuple(base.spawn_key) + (_tag_key(tag),)
        )
    return np.random.SeedSequence(int(seed), spawn_key=(_tag_key(tag),))


def stream(seed, tag: str) -> np.random.Generator:
    """Independent generator for operation ``tag`` under ``seed``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, tag)))


def child_seeds(seed, tag: str, count: int) -> list:
    """``count`` independent child seed sequences, e.g. one per trial."""
    return seed_sequence(seed, tag).spawn(count)
