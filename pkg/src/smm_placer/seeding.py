"""Deterministic RNG derivation for independent, order-free evaluation streams."""

from __future__ import annotations

import hashlib

import numpy as np


def stream_key(*parts) -> bytes:
    """Stable digest of heterogeneous components (ints, strings, floats, arrays)."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, bytes):
            h.update(b"b" + p)
        elif isinstance(p, str):
            h.update(b"s" + p.encode("utf-8"))
        elif isinstance(p, (int, np.integer)):
            h.update(b"i" + int(p).to_bytes(16, "little", signed=True))
        elif isinstance(p, (float, np.floating)):
            h.update(b"f" + np.float64(p).tobytes())
        elif isinstance(p, np.ndarray):
            h.update(b"a" + np.ascontiguousarray(p, dtype=np.float64).tobytes())
        else:
            raise TypeError(f"cannot key rng stream on {type(p).__name__}")
        h.update(b"\x00")
    return h.digest()


def derive_rng(*parts) -> np.random.Generator:
    """Generator seeded from a content hash; independent of evaluation order."""
    digest = stream_key(*parts)
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence(words))
