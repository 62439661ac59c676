"""Deterministic random-stream plumbing.

All randomness in the package flows through counter-based Philox streams keyed
by ``(seed, label...)``.  Streams for distinct labels are independent and can
be generated in any order (or in parallel) without changing the result, which
is what makes sweeps and per-iteration slice draws reproducible regardless of
how the work is scheduled.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "stream", "block_streams", "BLOCK_SLICES"]

# Slices are generated in fixed-size blocks, each from its own keyed stream,
# so a large slice set can be assembled block-by-block in any order.
BLOCK_SLICES = 4096

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, *labels: int | str) -> int:
    """Mix ``seed`` and a label path into a new 64-bit seed.

    The mixing is a plain SHA-256 over a canonical encoding, so derived seeds
    are stable across platforms and releases.
    """
    h = hashlib.sha256()
    h.update(int(seed & _MASK64).to_bytes(8, "little"))
    for label in labels:
        if isinstance(label, str):
            data = label.encode("utf-8")
            h.update(b"s" + len(data).to_bytes(4, "little") + data)
        else:
            h.update(b"i" + int(label & _MASK64).to_bytes(8, "little"))
    return int.from_bytes(h.digest()[:8], "little")


def stream(seed: int, *labels: int | str) -> np.random.Generator:
    """Return a Philox generator for the stream named by ``(seed, labels)``."""
    key = derive_seed(seed, *labels) if labels else int(seed & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def block_streams(seed: int, count: int) -> list[tuple[int, int, np.random.Generator]]:
    """Split ``count`` items into blocks with one independent stream per block.

    Returns ``(start, stop, generator)`` triples covering ``range(count)``.
    Each block's stream depends only on ``(seed, block index)``, so blocks can
    be realized in any order and the assembled result is identical.
    """
    out = []
    for block, start in enumerate(range(0, count, BLOCK_SLICES)):
        stop = min(start + BLOCK_SLICES, count)
        out.append((start, stop, stream(seed, "block", block)))
    return out
