"""Deterministic random-stream tree.

Every stochastic routine in the package draws from a child stream derived
from a master seed by a (purpose tag, index...) key, so independent pieces
of work (Monte-Carlo samples, realizations, evaluation draws) can run in any
order or in parallel and still reproduce bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def child_seed_sequence(master: int, tag: str, *index: int) -> np.random.SeedSequence:
    """SeedSequence for the (tag, *index) node under `master`."""
    return np.random.SeedSequence(entropy=int(master), spawn_key=(_tag_key(tag), *index))


def child_rng(master: int, tag: str, *index: int) -> np.random.Generator:
    """Generator for the (tag, *index) node under `master`."""
    return np.random.default_rng(child_seed_sequence(master, tag, *index))


def as_rng(seed) -> np.random.Generator:
    """Accept an int seed or a ready Generator and return a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
