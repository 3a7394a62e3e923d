"""Seeded random streams.

Every stochastic routine takes an explicit seed. Streams are Philox4x64
(counter-based) generators keyed through ``numpy.random.SeedSequence`` so a
parent seed can be split into independent child streams by a tuple of
integer or string keys::

    rng = generator(1234, "gurvits", 7)

The same ``(seed, *keys)`` always yields the same stream.
"""

from __future__ import annotations

import hashlib

import numpy as np



def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return int(key)
    if isinstance(key, bytes):
        data = key
    else:
        data = str(key).encode()
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


def seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=tuple(_key_to_int(k) for k in keys))


def generator(seed, *keys) -> np.random.Generator:
    """Return a Philox generator for ``seed`` split by ``keys``.

    Passing an existing ``Generator`` returns it unchanged (keys must be empty).
    """
    if isinstance(seed, np.random.Generator):
        if keys:
            raise ValueError("cannot split an existing Generator by keys")
        return seed
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *keys)))


def derive_seed(seed: int, *keys) -> int:
    """A 63-bit integer seed for a child stream."""
    return int(seed_sequence(seed, *keys).generate_state(1, np.uint64)[0] >> np.uint64(1))
