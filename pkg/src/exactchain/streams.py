"""Counter-based uniform streams and their minorization-quantized Y view.

A stream is a pure function of (seed, index): U_i = hash(seed, i) mapped to
[0,1) with 53-bit resolution.  Indices range over all of Z (negative times are
the past), so a stream can be extended backward in O(1) without replay.  Two
streams with distinct seeds are independent for all practical purposes.

The Y view quantizes each U_i against the cumulative minorization masses of a
kernel: Y_i = a when U_i falls in the a-th minorization cell, and the star
sentinel when U_i exceeds the total minorization mass.  Y_i is a certain
symbol of the target chain whenever it is not a star, regardless of the past.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import backend

#: Star sentinel emitted by the Y view when the draw exceeds the total
#: minorization mass.  Symbols are always 0..m-1, so -1 is safe.
STAR = -1

_MASK = 0xFFFFFFFFFFFFFFFF


def _check_index(i) -> int:
    if isinstance(i, (bool, float)) or not isinstance(i, (int, np.integer)):
        raise TypeError(f"stream index must be an int, got {type(i).__name__}")
    return int(i)


class RandomStream:
    """Immutable uniform stream keyed by an integer seed."""

    __slots__ = ("seed", "_key")

    def __init__(self, seed):
        if isinstance(seed, (bool, float)) or not isinstance(seed, (int, np.integer)):
            raise TypeError(f"seed must be an int, got {type(seed).__name__}")
        self.seed = int(seed)
        self._key = backend.derive_key(self.seed & _MASK)

    def uniform_at(self, i) -> float:
        """U_i in [0,1)."""
        return backend.uniform_at(self._key, _check_index(i))

    def uniforms(self, lo, hi) -> np.ndarray:
        """U_lo .. U_{hi-1} as a float64 array."""
        lo = _check_index(lo)
        hi = _check_index(hi)
        if hi < lo:
            raise ValueError(f"empty index range: [{lo}, {hi})")
        return backend.uniforms(self._key, lo, hi)

    def __repr__(self):
        return f"RandomStream(seed={self.seed})"

    def __eq__(self, other):
        return isinstance(other, RandomStream) and other.seed == self.seed

    def __hash__(self):
        return hash(("RandomStream", self.seed))


def y_thresholds(alpha: Sequence[float]) -> np.ndarray:
    """Cumulative minorization thresholds from the per-symbol masses.

    thresholds[a] = alpha(0) + ... + alpha(a); a uniform below thresholds[a]
    but not below thresholds[a-1] quantizes to symbol a.
    """
    masses = np.asarray(alpha, dtype=np.float64)
    if masses.ndim != 1 or len(masses) < 1:
        raise ValueError("alpha must be a non-empty 1-d sequence")
    if np.any(masses < 0.0):
        raise ValueError("minorization masses must be non-negative")
    acc = []
    running = []
    for x in masses:
        running.append(float(x))
        acc.append(math.fsum(running))
    th = np.asarray(acc, dtype=np.float64)
    if th[-1] > 1.0:
        raise ValueError(f"minorization masses sum to {th[-1]} > 1")
    return th


def y_at(stream: RandomStream, thresholds: np.ndarray, i) -> int:
    """Y_i: the quantized symbol at index i, or STAR."""
    u = stream.uniform_at(i)
    for a, t in enumerate(thresholds):
        if u < t:
            return a
    return STAR


def y_range(stream: RandomStream, thresholds: np.ndarray, lo, hi) -> np.ndarray:
    """Y_lo .. Y_{hi-1} as an int8 array (STAR = -1)."""
    return backend.y_fill(stream.uniforms(lo, hi), thresholds)


def y_completed(stream: RandomStream, thresholds: np.ndarray, i, filler: int) -> int:
    """Y_i with stars replaced by the filler symbol."""
    y = y_at(stream, thresholds, i)
    if y == STAR:
        m = len(thresholds)
        if not 0 <= filler < m:
            raise ValueError(f"filler symbol {filler} outside alphabet of size {m}")
        return filler
    return y
