"""Canonical byte encoding, commitments and hash-driven permutations.

Canonical encoding: every field is serialised to bytes and prefixed with
its length as a 4-byte big-endian integer; fields are concatenated in
declared order. Integers are 8-byte big-endian two's complement, floats
8-byte IEEE-754 big-endian, strings UTF-8, ``Decimal`` values their string
form, and sequences the canonical encoding of their items.
"""

from __future__ import annotations

import hashlib
import struct
from decimal import Decimal
from typing import Sequence

ZERO_DIGEST = bytes(32)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _field(value) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value)
    if isinstance(value, bool):
        return struct.pack(">q", int(value))
    if isinstance(value, int):
        return struct.pack(">q", value)
    if hasattr(value, "dtype") and value.shape == ():
        return _field(value.item())
    if isinstance(value, float):
        return struct.pack(">d", value)
    if isinstance(value, str):
        return value.encode()
    if isinstance(value, Decimal):
        return str(value).encode()
    if isinstance(value, (list, tuple)) or hasattr(value, "__array__"):
        return canonical(*list(value))
    raise TypeError(f"no canonical encoding for {type(value).__name__}")


def canonical(*fields) -> bytes:
    out = bytearray()
    for f in fields:
        b = _field(f)
        out += struct.pack(">I", len(b))
        out += b
    return bytes(out)


def commitment_digest(sample: Sequence[int], commit_time: int, nonce: bytes) -> bytes:
    """SHA-256 over ``canonical(sample) || u64(commit_time) || nonce``."""
    return commitment_digest_raw(canonical(*[int(v) for v in sample]), commit_time, nonce)


def commitment_digest_raw(sample_bytes: bytes, commit_time: int, nonce: bytes) -> bytes:
    if len(nonce) != 32:
        raise ValueError("commitment nonces are 32 bytes")
    return sha256(sample_bytes + struct.pack(">Q", commit_time) + nonce)


class _HashStream:
    """Counter-mode SHA-256 byte stream yielding 64-bit words."""

    def __init__(self, seed: bytes):
        self.seed = seed
        self.counter = 0
        self.buf = b""

    def word(self) -> int:
        if len(self.buf) < 8:
            self.buf += sha256(self.seed + struct.pack(">Q", self.counter))
            self.counter += 1
        w, self.buf = self.buf[:8], self.buf[8:]
        return int.from_bytes(w, "big")

    def below(self, bound: int) -> int:
        """Uniform integer in ``[0, bound)`` by rejection on 64-bit words."""
        limit = (1 << 64) - (1 << 64) % bound
        while True:
            w = self.word()
            if w < limit:
                return w % bound


def hash_to_permutation(digest: bytes, n: int, domain_tag: str) -> list[int]:
    """Deterministic uniform permutation of ``0..n-1`` from a digest.

    Fisher-Yates driven by SHA-256 in counter mode over
    ``digest || len(tag) || tag``; distinct tags give independent maps.
    """
    if n < 1:
        raise ValueError("permutation size must be at least 1")
    tag = domain_tag.encode()
    stream = _HashStream(bytes(digest) + struct.pack(">I", len(tag)) + tag)
    perm = list(range(n))
    for i in range(n - 1, 0, -1):
        j = stream.below(i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    """Binary Merkle root over SHA-256 leaf hashes; odd levels repeat the last node."""
    if not leaves:
        return sha256(b"")
    level = [sha256(b"\x00" + bytes(t)) for t in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha256(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]
