"""Counter-based SplitMix64 substreams.

Every random quantity in the package comes from here, so that a run is
fully determined by ``(seed, stream)`` and can be replayed bit-for-bit on
any platform.

Algorithm
---------
``mix64`` is the SplitMix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

(all arithmetic modulo 2**64).  A substream is a SplitMix64 generator whose
initial state is ``key = mix64(seed ^ mix64(stream + GOLDEN))``.  The value
at position ``t`` (0-based) is ``mix64(key + (t + 1) * GOLDEN)``, so any
position can be read without generating its predecessors.  Uniform variates
are ``(z >> 11) * 2**-53`` in ``[0, 1)``.

Test vectors (plain SplitMix64, i.e. state = key):

    key = 0        -> 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, ...
    key = 1234567  -> 6457827717110365317, 3203168211198807973, ...

and for substreams, ``substream_key(0, 0) = 0x48218226FF3CD4BF`` (checked in
the test suite).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_U53 = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def substream_key(seed: int, stream: int = 0) -> int:
    """Key of substream ``stream`` under ``seed`` (both taken modulo 2**64)."""
    if stream < 0:
        raise ValueError("stream index must be non-negative")
    return mix64((seed & MASK64) ^ mix64((stream + GOLDEN) & MASK64))


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def raw_block(key: int, start: int, n: int) -> np.ndarray:
    """Raw 64-bit outputs at positions ``start .. start+n-1`` of the stream ``key``."""
    if n <= 0:
        return np.zeros(0, dtype=np.uint64)
    # uint64 arithmetic wraps silently on arrays, which is the intended modulus
    t = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    state = np.uint64(key & MASK64) + t * np.uint64(GOLDEN)
    return _mix64_array(state)


def uniform_block(key: int, start: int, n: int) -> np.ndarray:
    return (raw_block(key, start, n) >> np.uint64(11)).astype(np.float64) * _U53


class Substream:
    """Sequential reader over one substream, used where a cursor is convenient."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed
        self.stream = stream
        self.key = substream_key(seed, stream)
        self.position = 0

    def uniforms(self, n: int) -> np.ndarray:
        out = uniform_block(self.key, self.position, n)
        self.position += max(n, 0)
        return out

    def uniform_in(self, lower, upper, n: int) -> np.ndarray:
        """``n`` points uniform in the box ``[lower, upper)``, shape ``(n, d)``."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        u = self.uniforms(n * lower.size).reshape(n, lower.size)
        return lower + u * (upper - lower)

    def normals(self, n: int) -> np.ndarray:
        # Box-Muller on two uniform blocks; 1 - u keeps the log argument positive
        u1 = 1.0 - self.uniforms(n)
        u2 = self.uniforms(n)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def choice_without_replacement(self, population: int, k: int) -> np.ndarray:
        """Partial Fisher-Yates: ``k`` distinct indices from ``range(population)``."""
        if k > population:
            raise ValueError("cannot draw more items than the population holds")
        u = self.uniforms(k)
        swapped: dict[int, int] = {}
        out = np.empty(k, dtype=np.int64)
        for j in range(k):
            r = j + int(u[j] * (population - j))
            out[j] = swapped.get(r, r)
            swapped[r] = swapped.get(j, j)
        return out
