"""Seed derivation and reproducible random streams.

Every realization gets its own Philox counter-based stream, keyed by a
64-bit seed derived by hashing (master seed, indices...).  Streams are
independent of scheduling: realization k always sees the same uniforms
no matter how work is batched across processes.
"""

import hashlib

import numpy as np
from numpy.random import Generator, Philox

_DOMAIN = b"dppat.seed.v1"


def derive_seed(master_seed: int, *indices: int) -> int:
    """Stable 64-bit seed from a master seed and an index path.

    Uses BLAKE2b so the derivation is identical on every platform and
    Python version (unlike hash()).
    """
    h = hashlib.blake2b(_DOMAIN, digest_size=8)
    h.update(int(master_seed).to_bytes(8, "little", signed=False))
    for idx in indices:
        h.update(int(idx).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little")


def stream(seed: int) -> Generator:
    """Counter-based uniform stream for one realization.

    The consumer contract is positional: row t of a simulation consumes
    uniforms [t*N, (t+1)*N), exactly one per site, so the stream layout
    never depends on code paths taken.
    """
    return Generator(Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))
