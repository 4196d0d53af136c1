"""Deterministic named random streams.

Every stochastic component owns a stream derived from (seed, *tags). Tags are
hashed with blake2b, not Python's ``hash``, so streams are stable across
processes and platforms.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _tag_entropy(tag: str) -> int:
    digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(seed: int, *tags: str) -> np.random.Generator:
    """Independent PCG64 generator keyed by an integer seed and string tags."""
    entropy = [int(seed) & _MASK64] + [_tag_entropy(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def mix_seeds(a: int, b: int) -> int:
    """Fold two seeds into one 64-bit seed; order-sensitive."""
    payload = f"{int(a) & _MASK64}:{int(b) & _MASK64}".encode("ascii")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")
