"""Reproducible random streams keyed by a root seed and a text label.

Adding a new labelled consumer never shifts the stream of an existing one.
"""

import hashlib

import numpy as np


def label_words(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def derive_rng(seed, label):
    """Generator for the stream ``(seed, label)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    words = [seed & 0xFFFFFFFF, (seed >> 32) & 0xFFFFFFFF] + label_words(label)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))
