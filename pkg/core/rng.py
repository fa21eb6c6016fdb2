"""
Hashing and seeded random streams.

Every random consumer in a run draws from its own named stream. A stream's
seed is FNV-1a 64 over "<run seed>/<label>", so adding a stream never shifts
the numbers drawn by another. Streams are numpy Generators over PCG64.
"""

import numpy as np

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """
    64-bit FNV-1a hash of raw bytes.

    Examples:
        fnv1a_64(b"")   # 0xcbf29ce484222325
        fnv1a_64(b"a")  # 0xaf63dc4c8601ec8c
    """
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def stream_seed(seed: int, label: str) -> int:
    """Derive the sub-seed of a named stream."""
    return fnv1a_64(f"{int(seed)}/{label}".encode("utf-8"))


def make_stream(seed: int, label: str) -> np.random.Generator:
    """Create the PCG64-backed generator for stream `label` of run `seed`."""
    return np.random.Generator(np.random.PCG64(stream_seed(seed, label)))
