"""Reproducible seed derivation.

Every job seed is a pure function of the master seed and a path of integer
keys, so results do not depend on execution order or worker count::

    splitmix64(x):
        x = x + 0x9E3779B97F4A7C15            (mod 2**64)
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9
        x = (x ^ (x >> 27)) * 0x94D049BB133111EB
        return x ^ (x >> 31)

    derive_seed(master, k1, k2, ...):
        s = master
        for k in keys: s = splitmix64(s ^ splitmix64(k))
"""

import numpy as np

MASK64 = (1 << 64) - 1

# stage ids used in derive_seed paths
STAGE_SEGMENT = 0
STAGE_H2 = 1
STAGE_H1 = 2
STAGE_CROSS = 3
STAGE_EVAL = 4
STAGE_SAMPLE = 5


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, *keys: int) -> int:
    s = int(master) & MASK64
    for k in keys:
        s = splitmix64(s ^ splitmix64(int(k) & MASK64))
    return s


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
