"""Seeded, splittable random streams.

Every consumer derives its own counter-based Philox stream from the run seed
and a purpose label, so adding draws in one place never shifts another
stream. The i-th draw of a stream depends only on (seed, purpose, keys, i).
"""

from __future__ import annotations

import zlib

import numpy as np

SHIFT_DIRECTION = "shift-direction"
DROPOUT = "dropout"


def _purpose_key(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, purpose, *keys)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, _purpose_key(purpose), *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def uniforms(seed: int, purpose: str, count: int) -> np.ndarray:
    """``count`` U(0, 1) draws indexed by element id."""
    return stream(seed, purpose).random(count)
