"""Seed derivation.

Every random stream is keyed by ``(master seed, path...)`` and drawn from a
Philox counter-based generator, so a module never depends on how many
numbers another module consumed.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode("utf-8"))


def derive_seed(master: int, *path) -> int:
    """Unsigned 64-bit seed for the stream named by ``path``."""
    ss = np.random.SeedSequence(int(master) & ((1 << 64) - 1), spawn_key=tuple(_key(p) for p in path))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(master: int, *path) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(derive_seed(master, *path)))
