"""Word-level bit primitives shared by the numba kernels.

All bit arrays are little-endian sequences of uint64 words: bit ``p`` lives
in word ``p >> 6`` at offset ``p & 63``.  Kernels keep every operand that
touches a word in uint64 to avoid numba's int64/uint64 float promotion.
"""

import numpy as np
from numba import njit

U0 = np.uint64(0)
U1 = np.uint64(1)
ALL = np.uint64(0xFFFFFFFFFFFFFFFF)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_S1 = np.uint64(1)
_S2 = np.uint64(2)
_S4 = np.uint64(4)
_S56 = np.uint64(56)

_MUR_M = np.uint64(0xC6A4A7935BD1E995)
_MUR_R = np.uint64(47)

NJ = dict(cache=True, nogil=True)


@njit(inline="always", **NJ)
def popcount(x):
    x = x - ((x >> _S1) & _M1)
    x = (x & _M2) + ((x >> _S2) & _M2)
    x = (x + (x >> _S4)) & _M4
    return np.int64((x * _H01) >> _S56)


@njit(inline="always", **NJ)
def ctz(x):
    # x must be nonzero
    return popcount((x & (~x + U1)) - U1)


@njit(inline="always", **NJ)
def select_in_word(x, r):
    for _ in range(r):
        x &= x - U1
    return ctz(x)


@njit(inline="always", **NJ)
def bit_length(x):
    n = 0
    while x != 0:
        x >>= np.uint64(1)
        n += 1
    return n


@njit(inline="always", **NJ)
def get_bit(words, pos):
    return np.int64((words[pos >> 6] >> np.uint64(pos & 63)) & U1)


@njit(inline="always", **NJ)
def set_bit(words, pos):
    words[pos >> 6] |= U1 << np.uint64(pos & 63)


@njit(inline="always", **NJ)
def read_bits(words, pos, width):
    """Read ``width`` (0..64) bits starting at bit ``pos``."""
    if width == 0:
        return U0
    w = pos >> 6
    off = pos & 63
    v = words[w] >> np.uint64(off)
    if off + width > 64:
        v |= words[w + 1] << np.uint64(64 - off)
    if width < 64:
        v &= (U1 << np.uint64(width)) - U1
    return v


@njit(inline="always", **NJ)
def write_bits(words, pos, width, value):
    """OR ``value`` into ``width`` bits at ``pos``; target bits must be zero."""
    if width == 0:
        return
    value = np.uint64(value)
    if width < 64:
        value &= (U1 << np.uint64(width)) - U1
    w = pos >> 6
    off = pos & 63
    words[w] |= value << np.uint64(off)
    if off + width > 64:
        words[w + 1] |= value >> np.uint64(64 - off)


@njit(**NJ)
def scan_select(words, start, r):
    """Absolute position of the (r+1)-th set bit at or after bit ``start``."""
    w = start >> 6
    x = words[w] & (ALL << np.uint64(start & 63))
    while True:
        c = popcount(x)
        if r < c:
            return w * 64 + select_in_word(x, r)
        r -= c
        w += 1
        x = words[w]


@njit(**NJ)
def next_one(words, start):
    """Position of the first set bit at or after ``start``."""
    w = start >> 6
    x = words[w] & (ALL << np.uint64(start & 63))
    while x == U0:
        w += 1
        x = words[w]
    return w * 64 + ctz(x)


@njit(**NJ)
def murmur64(buf, start, length, seed):
    """MurmurHash64A over ``buf[start:start+length]`` (uint8)."""
    h = np.uint64(seed) ^ (np.uint64(length) * _MUR_M)
    nblocks = length // 8
    for b in range(nblocks):
        p = start + 8 * b
        k = U0
        for t in range(8):
            k |= np.uint64(buf[p + t]) << np.uint64(8 * t)
        k *= _MUR_M
        k ^= k >> _MUR_R
        k *= _MUR_M
        h ^= k
        h *= _MUR_M
    rem = length & 7
    if rem:
        p = start + 8 * nblocks
        for t in range(rem - 1, -1, -1):
            h ^= np.uint64(buf[p + t]) << np.uint64(8 * t)
        h *= _MUR_M
    h ^= h >> _MUR_R
    h *= _MUR_M
    h ^= h >> _MUR_R
    return h


@njit(**NJ)
def mix64(x):
    # splitmix64 finalizer
    x ^= x >> np.uint64(30)
    x *= np.uint64(0xBF58476D1CE4E5B9)
    x ^= x >> np.uint64(27)
    x *= np.uint64(0x94D049BB133111EB)
    x ^= x >> np.uint64(31)
    return x


def words_for(nbits):
    """uint64 words needed for ``nbits`` bits plus one guard word."""
    return (int(nbits) + 63) // 64 + 1
