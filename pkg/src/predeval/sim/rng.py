"""Stable, order-independent random streams keyed by run identifiers."""

from __future__ import annotations

import zlib

import numpy as np


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFFFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def rng_for(*keys) -> np.random.Generator:
    """Generator seeded from an arbitrary tuple of ints/strings.

    Streams for different keys are independent, so results never depend on
    the order in which scenarios or agents are processed.
    """
    words = []
    for k in keys:
        v = _key_int(k)
        words.extend([v & 0xFFFFFFFF, v >> 32])
    return np.random.default_rng(np.random.SeedSequence(words))
