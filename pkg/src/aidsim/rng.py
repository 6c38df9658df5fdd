"""Reproducible random streams.

A RandomStream owns a base seed and hands out independent named substreams
(PCG64 generators). Substream derivation uses a SHA-256 digest of the name,
so the mapping seed+name -> bit stream is stable across platforms and
process/thread schedules. Replication seeds are derived the same way from
an integer counter.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class RandomStream:
    """Seeded source of named, independent numpy generators."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def substream(self, name: str) -> np.random.Generator:
        """Generator for `name`; same (seed, name) always yields the same stream."""
        seq = np.random.SeedSequence([self.seed, _name_key(name)])
        return np.random.Generator(np.random.PCG64(seq))

    def replication(self, index: int) -> "RandomStream":
        """Derived stream for replication `index` (counter-based, order-free)."""
        seq = np.random.SeedSequence([self.seed, _name_key("replication"), int(index)])
        # Collapse to a plain integer seed so the child is itself a RandomStream.
        child = int(seq.generate_state(1, np.uint64)[0])
        return RandomStream(child)


def as_generator(stream) -> np.random.Generator:
    """Accept a RandomStream, Generator, or int seed and return a Generator."""
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.substream("default")
    return RandomStream(int(stream)).substream("default")
