"""Deterministic, splittable random streams.

Every stochastic component of the package draws from a Philox-4x64
counter-based generator whose 64-bit key is derived by hashing the master
seed together with a purpose tag and integer indices (FNV-1a, 64-bit:
offset 0xCBF29CE484222325, prime 0x100000001B3).  Philox has fixed,
published round constants and numpy implements it identically on every
platform, so a master seed fully determines every generated population,
gold phase, and simulated label, and sub-streams such as
``stream(seed, "gold", worker_index)`` are independent and may be consumed
in any order (sequentially or in parallel) with identical results.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _to_bytes(part: int | str) -> bytes:
    if isinstance(part, (int, np.integer)):
        return int(part & _MASK64).to_bytes(8, "little")
    return str(part).encode("utf-8")


def mix(master_seed: int, *parts: int | str) -> int:
    """Hash a master seed plus purpose parts into a 64-bit stream key."""
    h = _FNV_OFFSET
    for part in (master_seed, *parts):
        for byte in _to_bytes(part):
            h ^= byte
            h = (h * _FNV_PRIME) & _MASK64
    # final avalanche so that short integer parts affect all bits
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & _MASK64
    h ^= h >> 33
    return h


def stream(master_seed: int, *parts: int | str) -> np.random.Generator:
    """Independent generator for (master seed, purpose tag, indices...)."""
    return np.random.Generator(np.random.Philox(key=mix(master_seed, *parts)))
