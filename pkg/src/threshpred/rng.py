"""Counter-based random number streams for reproducible (parallel) simulation.

Every stochastic operation derives its generator from a 64-bit user seed plus
an integer derivation path, e.g. ``(cell_index, replication_index)``.  Streams
are independent and identical no matter how work is scheduled across workers,
which is what makes Monte Carlo outputs byte-reproducible under any degree of
parallelism.
"""

import hashlib

import numpy as np


def _as_key(part) -> int:
    """Map a path component to a non-negative integer spawn key."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("derivation path components must be non-negative")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"unsupported derivation path component: {part!r}")


def derive_rng(seed: int, *path) -> np.random.Generator:
    """Return a Philox generator for ``(seed, *path)``.

    Philox is counter based, so equal ``(seed, path)`` pairs always produce
    the same stream, and distinct paths produce statistically independent
    streams.

    Parameters
    ----------
    seed : int
        Base experiment seed.
    *path
        Non-negative integers (or strings, hashed stably) identifying the
        consumer, e.g. a replication index.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_as_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
