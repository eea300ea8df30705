"""Named child random streams derived from one experiment seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def child_seed(seed: int, *path) -> int:
    """Deterministic 63-bit seed for the stream ``seed/path[0]/path[1]/...``.

    Path elements may be names (hashed) or integers (used as-is), so
    ``child_seed(s, "forest", 3)`` does not depend on scheduling order.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in path:
        entropy.append(stream_key(part) if isinstance(part, str) else int(part))
    ss = np.random.SeedSequence(entropy)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def child_rng(seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, *path))
