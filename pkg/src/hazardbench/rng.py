"""Portable seeded random numbers.

Every random decision in the package (train/test permutations, CV folds,
bootstrap draws, candidate features, search draws, network init) comes
from SplitMix64 (Steele, Lea & Flood 2014) with the bounded-integer and
shuffle algorithms fixed below.  numpy's ``Generator`` methods are not
guaranteed to produce the same streams across numpy releases, so they are
not used for anything that affects results.

Algorithms
----------
next_u64:   state += 0x9E3779B97F4A7C15; z = state;
            z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9;
            z = (z ^ z >> 27) * 0x94D049BB133111EB;
            return z ^ z >> 31
bounded(n): rejection sampling, reject draws below (2**64 - n) mod n,
            return draw mod n
uniform:    (next_u64 >> 11) * 2**-53
shuffle:    Fisher-Yates from the last index down, j = bounded(i + 1)
derive:     h = mix(seed); for each component c: h = mix(h ^ mix(c + golden))
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_MASK = (1 << 64) - 1


@njit(cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def next_u64(state):
    state[0] += GOLDEN
    return mix64(state[0])


@njit(cache=True)
def bounded(state, n):
    """Uniform integer in ``[0, n)``; ``n`` must be positive."""
    un = np.uint64(n)
    threshold = (np.uint64(0) - un) % un
    while True:
        r = next_u64(state)
        if r >= threshold:
            return np.int64(r % un)


@njit(cache=True)
def uniform(state):
    return np.float64(next_u64(state) >> _S11) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def shuffle_inplace(state, arr):
    for i in range(arr.shape[0] - 1, 0, -1):
        j = bounded(state, i + 1)
        tmp = arr[i]
        arr[i] = arr[j]
        arr[j] = tmp


def _mix_py(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Hash ``seed`` and an index path into an independent 64-bit seed.

    Used for per-tree, per-fold and per-trial streams so that results do
    not depend on the order in which work is scheduled.
    """
    h = _mix_py(int(seed))
    for c in path:
        h = _mix_py(h ^ _mix_py(int(c) + 0x9E3779B97F4A7C15))
    return h


class SplitMix64:
    """Small stateful wrapper around the jitted primitives."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.state = np.array([int(seed) & _MASK], dtype=np.uint64)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def integers(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        return int(bounded(self.state, n))

    def random(self) -> float:
        return float(uniform(self.state))

    def permutation(self, n: int) -> np.ndarray:
        arr = np.arange(n, dtype=np.int64)
        shuffle_inplace(self.state, arr)
        return arr

    def shuffle(self, arr: np.ndarray) -> None:
        shuffle_inplace(self.state, arr)
