"""Seeded random-number substreams.

Every randomized stage derives its generator from (seed, stage name) so that
stages can be re-run or ablated independently without perturbing each other.
"""

import hashlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for a named stage, deterministic in (seed, name)."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()[:8]
    return np.random.default_rng([int(seed), int.from_bytes(digest, "little")])
