"""Seed derivation and deterministic random streams.

Every stochastic operation in the package draws from its own Philox stream
(counter-based, 64-bit keyed), with the key derived from an explicit seed and
a stable FNV-1a hash of string tokens. Results are therefore independent of
execution order and thread count.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a_64(text: str) -> int:
    """64-bit FNV-1a hash of a string (UTF-8 bytes)."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & MASK64
    return h


def derive_seed(seed: int, *parts: object) -> int:
    """seed XOR FNV-1a("part0|part1|..."); stable across runs and platforms."""
    return (int(seed) ^ fnv1a_64("|".join(str(p) for p in parts))) & MASK64


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))


def fmt_param(x: float) -> str:
    """Canonical string form for grid parameters used in seed derivation."""
    return f"{float(x):g}"
