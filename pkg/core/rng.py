"""Counter-based random streams.

A stream is a ``numpy.random.Generator`` derived from a master seed and a
tuple of parts (``("offspring", generation, slot)``, ``("split", run)``...).
The same (seed, parts) yields the same stream in any process, so work can be
spread over workers without changing results. Python's ``hash()`` is salted
per process and is never used here.
"""

from typing import Union

import numpy as np

Part = Union[int, str, bytes]

_FNV_OFFSET64 = 0xCBF29CE484222325
_FNV_PRIME64 = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _to_bytes(part: Part) -> bytes:
    if isinstance(part, bytes):
        return part
    if isinstance(part, (int, np.integer)):
        return int(part & _MASK64).to_bytes(8, "little", signed=False)
    return str(part).encode("utf-8")


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET64
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME64) & _MASK64
    return h


def mix(seed: int, *parts: Part) -> int:
    """Deterministically fold parts into a 64-bit key (stable across processes)."""
    h = _fnv1a64(_to_bytes(seed))
    for part in parts:
        h ^= _fnv1a64(_to_bytes(part))
        h = (h * _FNV_PRIME64) & _MASK64
    return h


def stream(seed: int, *parts: Part) -> np.random.Generator:
    """Generator for the (seed, *parts) stream."""
    # SeedSequence keeps the raw seed as a second word so distinct seeds never
    # collapse onto the same key.
    return np.random.default_rng(np.random.SeedSequence([mix(seed, *parts), int(seed) & _MASK64]))


class StreamFactory:
    """Binds a master seed so callers only pass the stream parts."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def __call__(self, *parts: Part) -> np.random.Generator:
        return stream(self.seed, *parts)

    def __repr__(self) -> str:
        return f"StreamFactory(seed={self.seed})"
