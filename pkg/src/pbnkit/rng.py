"""Reproducible random streams for the simulator.

Each trajectory gets its own SplitMix64 stream.  The stream for trajectory
``k`` under master seed ``m`` starts from::

    child(m, k) = mix64(mix64(m) + (k + 1) * 0x9E3779B97F4A7C15)   (mod 2**64)

and each draw advances the state by the golden-ratio constant and returns
``mix64(state) >> 11`` scaled by 2**-53.  ``mix64`` is the SplitMix64
finalizer.  Any implementation following these three lines reproduces the
streams exactly.
"""
import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def child_seed(master_seed: int, k: int) -> int:
    return mix64((mix64(master_seed) + (k + 1) * GOLDEN) & MASK)


def child_seeds(master_seed: int, count: int) -> np.ndarray:
    return np.array([child_seed(master_seed, k) for k in range(count)], dtype=np.uint64)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        return mix64(self.state)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)
