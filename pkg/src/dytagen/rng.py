"""Labeled random substreams derived from a single root seed.

Every stochastic component (walks, recall sampling, projections, stub
policies) draws from its own substream so that adding or reordering one
consumer never perturbs another.  Substreams are keyed by string labels,
hashed with a keyed BLAKE2 so the mapping is stable across processes and
platforms (unlike the builtin ``hash``).
"""

from __future__ import annotations

import hashlib

import numpy as np

_PERSON = b"dytagen.rng"


def _digest(root_seed: int, labels: tuple[str, ...]) -> bytes:
    h = hashlib.blake2b(digest_size=16, person=_PERSON)
    h.update(str(int(root_seed)).encode("utf-8"))
    for label in labels:
        h.update(b"\x1f")
        h.update(label.encode("utf-8"))
    return h.digest()


def substream_seed(root_seed: int, *labels: str) -> int:
    """Derive a 128-bit integer seed for the labeled substream."""
    return int.from_bytes(_digest(root_seed, labels), "big")


def substream(root_seed: int, *labels: str) -> np.random.Generator:
    """A fresh PCG64 generator for the labeled substream."""
    return np.random.default_rng(substream_seed(root_seed, *labels))


def stable_token_hash(token: str, salt: bytes = b"") -> int:
    """64-bit stable hash of a token, independent of PYTHONHASHSEED."""
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8, person=_PERSON, salt=salt[:8])
    return int.from_bytes(h.digest(), "big")
