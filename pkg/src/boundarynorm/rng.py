"""Seeded random number generation.

Every seeded operation in the toolkit (parameter init, data synthesis,
shuffling, splits) draws from numpy's Philox bit generator: a counter-based
generator on 64-bit words whose streams are identical across platforms, so
seeds appearing in configs and tests reproduce bit-exactly anywhere.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))
