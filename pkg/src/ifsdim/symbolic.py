"""Finite words and infinite symbol streams over the index set.

Symbols are 1-based.  Positions are 0-based Python indices: ``stream[0]`` is
the first symbol ``i_1``.
"""

from __future__ import annotations

import numpy as np

from .model import ConfigError, ProbabilityVector
from .rng import substream_key, uniform_block

DEFAULT_HORIZON = 10**7
_BLOCK = 1 << 16


class SearchExhausted(RuntimeError):
    """The requested visit did not occur within the search horizon."""


class SymbolWord(tuple):
    """An immutable finite word; ``a + b`` is concatenation."""

    def __new__(cls, symbols=()):
        symbols = tuple(int(s) for s in symbols)
        if any(s < 1 for s in symbols):
            raise ValueError("symbols are 1-based positive integers")
        return super().__new__(cls, symbols)

    def __add__(self, other):
        return SymbolWord(tuple(self) + tuple(other))

    def __getitem__(self, key):
        out = super().__getitem__(key)
        return SymbolWord(out) if isinstance(key, slice) else out

    def check_alphabet(self, m: int | None):
        if m is not None and any(s > m for s in self):
            raise ValueError(f"symbol outside 1..{m}")
        return self

    def __repr__(self):
        return f"SymbolWord({tuple(self)!r})"


class SymbolStream:
    """An infinite sequence, read in blocks from some ``offset``."""

    def __init__(self, offset: int = 0):
        self.offset = offset

    def _raw(self, start: int, n: int) -> np.ndarray:
        raise NotImplementedError

    def block(self, start: int, n: int) -> np.ndarray:
        return self._raw(self.offset + start, n)

    def take(self, n: int) -> SymbolWord:
        return SymbolWord(self.block(0, n).tolist())

    def __getitem__(self, k: int) -> int:
        if k < 0:
            raise IndexError("streams have no end to index from")
        return int(self.block(k, 1)[0])

    def shifted(self, k: int) -> "SymbolStream":
        raise NotImplementedError


class RandomStream(SymbolStream):
    """i.i.d. symbols with distribution ``p``, from substream ``(seed, stream)``."""

    def __init__(self, p: ProbabilityVector, seed: int, stream: int = 0, offset: int = 0):
        super().__init__(offset)
        self.p = p
        self.seed = seed
        self.stream = stream
        self.key = substream_key(seed, stream)
        self._prefix = np.zeros(0, dtype=np.int64)

    def _raw(self, start, n):
        end = start + n
        if end <= len(self._prefix):
            return self._prefix[start:end]
        if end <= 4 * _BLOCK:
            # keep a materialized prefix for repeated short reads
            grow = max(end, 2 * len(self._prefix), 1024)
            fresh = self.p.symbols(uniform_block(self.key, len(self._prefix), grow - len(self._prefix)))
            self._prefix = np.concatenate([self._prefix, fresh])
            return self._prefix[start:end]
        return self.p.symbols(uniform_block(self.key, start, n))

    def shifted(self, k):
        out = RandomStream(self.p, self.seed, self.stream, self.offset + k)
        out._prefix = self._prefix
        return out


class PeriodicStream(SymbolStream):
    """The stream ``word word word ...``."""

    def __init__(self, word, offset: int = 0):
        super().__init__(offset)
        self.word = SymbolWord(word)
        if not self.word:
            raise ValueError("a periodic stream needs a non-empty word")
        self._arr = np.array(self.word, dtype=np.int64)

    def _raw(self, start, n):
        return self._arr[np.arange(start, start + n) % len(self._arr)]

    def shifted(self, k):
        return PeriodicStream(self.word, self.offset + k)


class WordThenStream(SymbolStream):
    """A finite head followed by an infinite tail stream."""

    def __init__(self, head, tail: SymbolStream, offset: int = 0):
        super().__init__(offset)
        self.head = np.array(SymbolWord(head), dtype=np.int64)
        self.tail = tail

    def _raw(self, start, n):
        h = len(self.head)
        if start >= h:
            return self.tail.block(start - h, n)
        first = self.head[start : start + n]
        rest = self.tail.block(0, n - len(first)) if n > len(first) else first[:0]
        return np.concatenate([first, rest])

    def shifted(self, k):
        return WordThenStream(self.head, self.tail, self.offset + k)


def sample_stream(p: ProbabilityVector, seed: int, stream: int = 0) -> RandomStream:
    """Reproducible i.i.d. stream with marginal ``p`` (validated first)."""
    if p.finite:
        vals = [float(v) for v in p.values]
        if any(not v > 0 for v in vals) or abs(sum(vals) - 1.0) > 1e-9:
            raise ConfigError("probability vector must be positive and sum to 1")
    elif not p.p(1) > 0:
        raise ConfigError("probability vector must be positive")
    return RandomStream(p, seed, stream)


def shift(s, k: int):
    """Left shift by ``k``: element ``j`` of the result is element ``j + k`` of ``s``."""
    if k < 0:
        raise ValueError("shift amount must be non-negative")
    if isinstance(s, SymbolStream):
        return s.shifted(k)
    word = SymbolWord(s)
    if k > len(word):
        raise ValueError(f"cannot shift a word of length {len(word)} by {k}")
    return word[k:]


def cylinder_probability(p: ProbabilityVector, pattern) -> float:
    """Product-measure mass of the cylinder fixed by ``pattern``."""
    out = 1.0
    for s in SymbolWord(pattern):
        out *= float(p.p(s))
    return out


def _matches(arr: np.ndarray, pattern: np.ndarray, n: int) -> np.ndarray:
    """Boolean array: window ``k`` of ``arr`` equals ``pattern``, for ``k < n``."""
    hit = np.ones(n, dtype=bool)
    for j, s in enumerate(pattern):
        hit &= arr[j : j + n] == s
    return hit


def occupation_count(i, pattern, n: int) -> int:
    """Number of ``k`` in ``[0, n-1]`` with ``i_{k+1..k+m} = pattern``."""
    if n < 1:
        raise ValueError("n must be positive")
    pat = np.array(SymbolWord(pattern), dtype=np.int64)
    need = len(pat) + n - 1
    if isinstance(i, SymbolStream):
        arr = i.block(0, need)
    else:
        arr = np.array(SymbolWord(i), dtype=np.int64)
        if len(arr) < need:
            raise ValueError(f"need a prefix of length {need}, word has {len(arr)}")
    if len(pat) == 0:
        return n
    return int(_matches(arr, pat, n).sum())


def hitting_time(i, pattern, n: int, horizon: int = DEFAULT_HORIZON) -> int:
    """Position of the ``n``-th visit of ``i`` to the cylinder of ``pattern``.

    Equivalently the least ``t`` with ``shift(i, t)`` in the cylinder and
    ``occupation_count(i, pattern, t) == n - 1``.  Only ``t < horizon`` is
    searched.
    """
    if n < 1:
        raise ValueError("n must be positive")
    pat = np.array(SymbolWord(pattern), dtype=np.int64)
    m = len(pat)
    if not isinstance(i, SymbolStream):
        word = np.array(SymbolWord(i), dtype=np.int64)
        horizon = min(horizon, len(word) - m + 1)
        source = lambda start, k: word[start : start + k]
    else:
        source = i.block
    seen = 0
    start = 0
    while start < horizon:
        k = min(_BLOCK, horizon - start)
        arr = source(start, k + m - 1)
        hits = np.flatnonzero(_matches(arr, pat, min(k, len(arr) - m + 1)))
        if seen + len(hits) >= n:
            return int(start + hits[n - seen - 1])
        seen += len(hits)
        start += k
    raise SearchExhausted(f"visit {n} not found within horizon {horizon} (saw {seen})")
