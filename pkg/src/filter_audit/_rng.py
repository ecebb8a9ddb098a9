"""Seed plumbing.

Every random stream in the package is derived from a
:class:`numpy.random.SeedSequence`, so a stream is addressed by a tuple of
integers (master seed plus spawn key) and never by call order.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator | None"


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # consume entropy from the caller's generator
        return np.random.SeedSequence(seed.integers(0, 2**63, size=4).tolist())
    return np.random.SeedSequence(seed)


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))


def derive(master_seed: int, *key: int) -> np.random.SeedSequence:
    """Seed sequence for the stream addressed by ``(master_seed, *key)``."""
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def split(seed, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent child sequences of ``seed``.

    For an explicit seed the children are a pure function of the seed; a
    ``None`` seed draws fresh OS entropy.
    """
    ss = as_seed_sequence(seed)
    base = ss.spawn_key
    return [
        np.random.SeedSequence(ss.entropy, spawn_key=base + (i,), pool_size=ss.pool_size)
        for i in range(n)
    ]
