"""Named deterministic RNG substreams.

Every source of randomness in a run is derived from the cell's master seed
plus a purpose string (and optional integer indices), so results do not
depend on execution order or parallel scheduling.

The derivation is SHA-256 over ``"<master>/<purpose>/<i0>/<i1>/..."``,
truncated to the top 8 bytes, interpreted big-endian as the seed of a
``numpy.random.default_rng``.
"""
from __future__ import annotations

import hashlib

import numpy as np


def substream_seed(master_seed: int, purpose: str, *indices: int) -> int:
    """Derive a 64-bit seed for the named substream."""
    parts = [str(master_seed), purpose, *(str(i) for i in indices)]
    digest = hashlib.sha256("/".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Generator for the named substream."""
    return np.random.default_rng(substream_seed(master_seed, purpose, *indices))
