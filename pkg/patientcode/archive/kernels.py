"""numba kernels for Hamming scans over packed 64-bit codes."""

import numpy as np
from numba import njit, prange

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@njit(nogil=True, cache=True)
def popcount64(x: np.uint64) -> np.uint64:
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(nogil=True, cache=True)
def hamming_scan(codes: np.ndarray, query: np.uint64) -> np.ndarray:
    """Hamming distance from one query word to every word in codes."""
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = np.int64(popcount64(codes[i] ^ query))
    return out


@njit(parallel=True, nogil=True, cache=True)
def pairwise_hamming(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(len(a), len(b)) matrix of XOR popcounts."""
    n = a.shape[0]
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.int64)
    for i in prange(n):
        for j in range(m):
            out[i, j] = np.int64(popcount64(a[i] ^ b[j]))
    return out
