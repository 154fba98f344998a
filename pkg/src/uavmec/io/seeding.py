"""Named random streams derived from one global seed.

Each stream is ``SeedSequence(seed, spawn_key=(crc32(name),))`` so adding or
removing a consumer never shifts the numbers another consumer sees.
"""
from __future__ import annotations

import zlib

import numpy as np


def _sequence(seed: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(name.encode("utf-8")),))


def stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(_sequence(seed, name))


def stream_seed(seed: int, name: str) -> int:
    """A 63-bit integer seed for APIs that take plain ints."""
    return int(_sequence(seed, name).generate_state(1, np.uint64)[0]) >> 1
