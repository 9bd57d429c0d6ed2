"""Deterministic seed derivation from a master seed."""

from __future__ import annotations

import zlib

import numpy as np


def _words(p) -> list[int]:
    if isinstance(p, (int, np.integer)):
        v = int(p)
        if v < 0:
            raise ValueError("seeds must be non-negative")
        return [v & 0xFFFFFFFF, (v >> 32) & 0xFFFFFFFF, 0]
    return [zlib.crc32(str(p).encode("utf-8")), 0, 1]


def derive_seed(master, *parts) -> int:
    """A 63-bit seed that depends only on ``master`` and the labelled ``parts``.

    Used so every iteration, role and worker draws independent but
    reproducible randomness, regardless of execution order.
    """
    entropy = [w for p in (master, *parts) for w in _words(p)]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
