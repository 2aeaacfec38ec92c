"""Seedable random streams usable from both Python and numba kernels.

The generator is xoshiro256** with its 256-bit state held in a small
``uint64`` array, so jitted code can draw from it without the per-call
boxing cost of ``numpy.random.Generator``.
"""
from __future__ import annotations

import numpy as np
from numba import njit, uint64

_MASK64 = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0


def _splitmix64(x: int) -> tuple[int, int]:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x, z ^ (z >> 31)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def uniform(s):
    """Uniform double in [0, 1)."""
    return (next_u64(s) >> uint64(11)) * _INV_2_53


@njit(cache=True)
def uniform_open(s):
    """Uniform double in (0, 1)."""
    while True:
        u = uniform(s)
        if u > 0.0:
            return u


@njit(cache=True)
def below(s, n):
    """Uniform integer in [0, n) by rejection (no modulo bias)."""
    bound = uint64(n)
    threshold = (uint64(0) - bound) % bound
    while True:
        r = next_u64(s)
        if r >= threshold:
            return np.int64(r % bound)


@njit(cache=True)
def normal(s):
    # Marsaglia polar method; the second variate is discarded to keep the
    # stream stateless apart from the generator words.
    while True:
        u = 2.0 * uniform(s) - 1.0
        v = 2.0 * uniform(s) - 1.0
        q = u * u + v * v
        if 0.0 < q < 1.0:
            return u * np.sqrt(-2.0 * np.log(q) / q)


@njit(cache=True)
def _fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = uniform(s)


@njit(cache=True)
def _fill_below(s, n, out):
    for i in range(out.shape[0]):
        out[i] = below(s, n)


@njit(cache=True)
def _fill_normal(s, out):
    for i in range(out.shape[0]):
        out[i] = normal(s)


class RngStream:
    """A reproducible random stream; identical seeds give identical draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int = 0):
        x = int(seed) & _MASK64
        words = []
        for _ in range(4):
            x, z = _splitmix64(x)
            words.append(z)
        self.state = np.array(words, dtype=np.uint64)

    def random(self, size: int | None = None):
        if size is None:
            return uniform(self.state)
        out = np.empty(size, dtype=np.float64)
        _fill_uniform(self.state, out)
        return out

    def integers(self, n: int, size: int | None = None):
        """Draw uniformly from ``range(n)``."""
        if n <= 0:
            raise ValueError("n must be positive")
        if size is None:
            return int(below(self.state, n))
        out = np.empty(size, dtype=np.int64)
        _fill_below(self.state, n, out)
        return out

    def normal(self, size: int | None = None):
        if size is None:
            return normal(self.state)
        out = np.empty(size, dtype=np.float64)
        _fill_normal(self.state, out)
        return out

    def choice(self, p: np.ndarray) -> int:
        """Sample an index from the (unnormalised, non-negative) weights ``p``."""
        cdf = np.cumsum(p, dtype=np.float64)
        total = cdf[-1]
        if not total > 0:
            raise ValueError("weights must have a positive sum")
        idx = int(np.searchsorted(cdf, self.random() * total, side="right"))
        return min(idx, len(cdf) - 1)

    def spawn(self) -> "RngStream":
        """Derive an independent child stream (advances this one)."""
        return RngStream(int(next_u64(self.state)))

    def getstate(self) -> tuple[int, ...]:
        return tuple(int(x) for x in self.state)
