"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox stream whose key
is ``(master_seed, label)`` and whose counter is positioned by an integer
path such as ``(trial,)`` or ``(trial, edge_block)``.  A draw therefore
depends only on the seed, the label and the path, never on how many other
draws happened before it or on which worker produced it.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK64 = (1 << 64) - 1


def label_key(label: str) -> int:
    """Stable 32-bit integer for a stream label."""
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *path: int) -> np.random.Generator:
    """Generator for one ``(seed, label, path)`` coordinate.

    ``path`` holds at most two non-negative integers; they occupy the two
    high words of the Philox counter so each coordinate owns a disjoint
    2**128-block region of the stream.
    """
    if len(path) > 2:
        raise ValueError("stream path holds at most two integers")
    if any(p < 0 for p in path):
        raise ValueError(f"stream path must be non-negative, got {path}")
    hi = list(path) + [0] * (2 - len(path))
    counter = [0, 0, hi[0] & _MASK64, hi[1] & _MASK64]
    key = [seed & _MASK64, label_key(label)]
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def child_seed(seed: int, label: str) -> int:
    """Derive an independent 63-bit master seed for a named sub-experiment."""
    g = stream(seed, "child:" + label)
    return int(g.integers(0, 2**63 - 1))
