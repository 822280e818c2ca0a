"""Pure-Python twin of the compiled stream core.

Selected at import time when the extension is unavailable.  Every function
must produce bit-identical results to ``_core.pyx``; integer arithmetic is
done mod 2**64 explicitly, batches go through numpy's wrapping uint64 ops.
"""

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_SALT = 0xD1B54A32D192ED03
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 2.0 ** -53


def mix64(x):
    """Finalizing 64-bit mixer (splitmix64 family); arguments taken mod 2**64."""
    x &= _MASK
    x ^= x >> 30
    x = (x * _MIX1) & _MASK
    x ^= x >> 27
    x = (x * _MIX2) & _MASK
    x ^= x >> 31
    return x


def derive_key(seed):
    """Map a seed (already reduced mod 2**64) to a stream key."""
    return mix64((seed & _MASK) ^ _SALT)


def uniform_at(key, index):
    """Uniform in [0,1) at a signed integer index of the keyed stream."""
    state = ((key & _MASK) + ((index & _MASK) * _GAMMA)) & _MASK
    return (mix64(state) >> 11) * _INV53


def uniforms(key, lo, hi):
    """Uniforms at indices lo..hi-1 as a float64 array."""
    n = hi - lo
    if n < 0:
        raise ValueError("empty index range: hi < lo")
    with np.errstate(over="ignore"):
        # element-wise adds/multiplies wrap mod 2**64, matching the C core
        idx = np.uint64(lo & _MASK) + np.arange(n, dtype=np.uint64)
        x = np.uint64(key & _MASK) + idx * np.uint64(_GAMMA)
        x ^= x >> np.uint64(30)
        x *= np.uint64(_MIX1)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_MIX2)
        x ^= x >> np.uint64(31)
    return (x >> np.uint64(11)).astype(np.float64) * _INV53


def y_fill(u, thresholds):
    """Quantize uniforms to Y symbols; -1 is the star sentinel."""
    u = np.asarray(u, dtype=np.float64)
    th = np.asarray(thresholds, dtype=np.float64)
    out = np.searchsorted(th, u, side="right").astype(np.int8)
    out[out == len(th)] = -1
    return out
