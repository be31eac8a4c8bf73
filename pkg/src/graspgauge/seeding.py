"""Named random streams derived from a single experiment seed.

Every stochastic stage (surface sampling, grasp rolls, pose perturbation,
mesh degradation) pulls its own generator via a stable stream name, so a
stage can be re-run in isolation and reproduces exactly what a full run
would have given it.
"""

import zlib

import numpy as np


def stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Return a Generator for the named substream of `seed`.

    Extra integer indices (level number, pair index, ...) extend the
    derivation so per-item streams stay independent.
    """
    entropy = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    entropy.extend(int(i) & 0xFFFFFFFF for i in indices)
    return np.random.default_rng(np.random.SeedSequence(entropy))
