"""Counter-based random streams.

Every walker owns a 64-bit key derived from (master seed, tags..., start index,
walker id); its k-th uniform is the SplitMix64 finalizer applied to
``key + (k + 1) * golden``. Streams therefore do not depend on how walkers are
scheduled across workers.
"""

from __future__ import annotations

import numba as nb
import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_INV53 = 1.0 / 9007199254740992.0

_MASK = (1 << 64) - 1


@nb.njit(inline="always", cache=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@nb.njit(inline="always", cache=True)
def walker_key(base, start, walker):
    return mix64(mix64(base + GOLDEN * np.uint64(start + 1)) + GOLDEN * np.uint64(walker + 1))


@nb.njit(inline="always", cache=True)
def uniform(key, counter):
    """Uniform double in [0, 1) with 53 random bits."""
    return (mix64(key + (counter + _ONE) * GOLDEN) >> _S11) * _INV53


@nb.njit(cache=True)
def _walker_key_py(base, start, walker):
    return walker_key(base, start, walker)


@nb.njit(cache=True)
def _uniform_py(key, counter):
    return uniform(key, counter)


@nb.njit(cache=True)
def _mix_py(z):
    return mix64(z)


def stream_base(master_seed: int, *tags: int) -> np.uint64:
    """Base key for a family of walker streams; ``tags`` separate run/dimension/etc."""
    k = _mix_py(np.uint64((int(master_seed) + int(GOLDEN)) & _MASK))
    for t in tags:
        k = _mix_py(np.uint64((int(k) + (int(t) + 1) * int(GOLDEN)) & _MASK))
    return np.uint64(k)


class WalkerStream:
    """Python-side view of one walker's stream, bit-identical to the kernels."""

    def __init__(self, base: np.uint64, start: int, walker: int):
        # keep the key unsigned: a plain int would be re-typed as int64 by numba
        self.key = np.uint64(_walker_key_py(np.uint64(base), start, walker))
        self.counter = 0

    def random(self) -> float:
        u = _uniform_py(self.key, np.uint64(self.counter))
        self.counter += 1
        return float(u)
