# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stream core: counter-based uniforms and Y-symbol quantization.

Must stay bit-for-bit identical to the pure-Python twin in ``_core_py``;
``tests/test_streams.py`` enforces the equivalence whenever this module built.
"""

import numpy as np

cimport numpy as cnp  # noqa: F401  (kept for buffer protocol availability)

cdef unsigned long long GAMMA = <unsigned long long> 0x9E3779B97F4A7C15
cdef unsigned long long SALT = <unsigned long long> 0xD1B54A32D192ED03
cdef unsigned long long MIX1 = <unsigned long long> 0xBF58476D1CE4E5B9
cdef unsigned long long MIX2 = <unsigned long long> 0x94D049BB133111EB
cdef double INV53 = 1.0 / 9007199254740992.0  # 2**-53


cdef inline unsigned long long _mix(unsigned long long x) nogil:
    x ^= x >> 30
    x = x * MIX1
    x ^= x >> 27
    x = x * MIX2
    x ^= x >> 31
    return x


def mix64(x):
    """Finalizing 64-bit mixer (splitmix64 family); arguments taken mod 2**64."""
    return _mix(<unsigned long long> (x & 0xFFFFFFFFFFFFFFFF))


def derive_key(seed):
    """Map a seed (already reduced mod 2**64) to a stream key."""
    return _mix((<unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)) ^ SALT)


def uniform_at(key, index):
    """Uniform in [0,1) at a signed integer index of the keyed stream."""
    cdef unsigned long long k = <unsigned long long> (key & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long u = <unsigned long long> (index & 0xFFFFFFFFFFFFFFFF)
    return <double> (_mix(k + u * GAMMA) >> 11) * INV53


def uniforms(key, lo, hi):
    """Uniforms at indices lo..hi-1 as a float64 array."""
    cdef long long n = hi - lo
    if n < 0:
        raise ValueError("empty index range: hi < lo")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef unsigned long long k = <unsigned long long> (key & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long base = <unsigned long long> (lo & 0xFFFFFFFFFFFFFFFF)
    cdef long long j
    with nogil:
        for j in range(n):
            o[j] = <double> (_mix(k + (base + <unsigned long long> j) * GAMMA) >> 11) * INV53
    return out


def y_fill(u, thresholds):
    """Quantize uniforms to Y symbols.

    thresholds[a] is the cumulative minorization mass up to symbol a; a draw
    below thresholds[a] (and not below thresholds[a-1]) emits symbol a, a draw
    at or above the total mass emits the star sentinel -1.
    """
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(thresholds, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t m = th.shape[0]
    out = np.empty(n, dtype=np.int8)
    cdef signed char[::1] o = out
    cdef Py_ssize_t i, a
    cdef double x
    with nogil:
        for i in range(n):
            x = uu[i]
            o[i] = -1
            for a in range(m):
                if x < th[a]:
                    o[i] = <signed char> a
                    break
    return out
