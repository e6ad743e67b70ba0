"""Deterministic random streams.

Every stochastic component draws from a Philox counter-based generator whose
key is derived from (seed, purpose strings), so independent purposes never
share a stream and any run replays bit-identically from its seed.
"""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, *purpose: str) -> np.random.Generator:
    """Generator for the given seed and purpose path."""
    key = tuple(zlib.crc32(p.encode("utf-8")) for p in purpose)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))
