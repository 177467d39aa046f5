"""Named, counter-based random streams.

Every random draw in the package comes from ``stream(seed, name)``. The
generator is Philox keyed by a hash of ``(seed, name)``, so a stream depends
only on its name and never on how many other streams were consumed before it
or on how work is split across threads.
"""

import hashlib

import numpy as np

__all__ = ["stream", "stream_key"]


def stream_key(seed: int, name: str) -> int:
    digest = hashlib.blake2b(f"{int(seed)}:{name}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, name: str) -> np.random.Generator:
    """Return an independent generator for the stream ``name`` under ``seed``."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, name)))
