"""Bitvectors and compressed monotone integer sequences.

Every encoded object is a flat ``uint64`` *blob*: a fixed 16-word header
followed by word-aligned regions.  The same blob is what numba kernels read
and what gets serialized, so a trie can pool many blobs into one array and
address each by its word offset.

Sequences
---------
Elias-Fano (EF)
    value ``v`` is split into ``l`` low bits (stored verbatim) and a high part
    ``v >> l`` stored in unary in the high bitvector: element ``i`` sets bit
    ``(v >> l) + i``.
Uniform partitioned EF (PEF)
    fixed-size blocks, each an EF sequence over its local universe
    ``[prev_upper, upper]``.  Block upper bounds and block bit offsets are
    bit-packed so access never searches over partition endpoints.
Codeword array
    index ``i`` becomes a codeword of ``floor(log2(i + 2))`` bits; a second
    bitvector marks where each codeword starts.
"""

from __future__ import annotations

import io
import struct

import numpy as np
from numba import njit

from ._bits import (
    NJ,
    U0,
    U1,
    bit_length,
    get_bit,
    next_one,
    read_bits,
    scan_select,
    set_bit,
    words_for,
    write_bits,
)
from .errors import EncodingError

__all__ = [
    "BitVector",
    "SelectIndex",
    "EliasFanoSequence",
    "PartitionedSequence",
    "CodewordArray",
    "PackedArray",
    "select1",
    "ef_build",
    "ef_access",
    "ef_find",
    "pef_build",
    "pef_access",
    "cw_encode",
    "cw_decode",
    "cwarray_build",
    "cwarray_access",
    "load_blob",
]

HEADER = 16
SAMPLE_RATE = 256
KIND_EF = 0
KIND_PEF = 1
KIND_CW = 2
KIND_PACKED = 3

# header slots (EF)
_M, _U = 1, 2
_EF_L, _EF_LOW, _EF_HIGH, _EF_HBITS, _EF_SAMP, _EF_NSAMP = 3, 4, 5, 6, 7, 8
# header slots (PEF)
_P_B, _P_NB, _P_UBW, _P_UB, _P_BOFF, _P_BOFFW, _P_DATA, _P_DBITS = 3, 4, 5, 6, 7, 8, 9, 10
# header slots (codewords)
_C_BBITS, _C_B, _C_L, _C_SAMP, _C_NSAMP = 2, 3, 4, 5, 6
# header slots (packed)
_K_W, _K_DATA = 2, 3


# ---------------------------------------------------------------- kernels


@njit(**NJ)
def _fill_samples(pool, region_word, nbits, samp_word):
    """Record the position of every SAMPLE_RATE-th set bit of a region."""
    seen = 0
    base = region_word * 64
    for p in range(nbits):
        if get_bit(pool, base + p):
            if seen % SAMPLE_RATE == 0:
                pool[samp_word + seen // SAMPLE_RATE] = np.uint64(p)
            seen += 1
    return seen


@njit(**NJ)
def _region_select(pool, region_word, samp_word, k):
    s = k // SAMPLE_RATE
    start = region_word * 64 + np.int64(pool[samp_word + s])
    return scan_select(pool, start, k - s * SAMPLE_RATE) - region_word * 64


@njit(**NJ)
def _ef_write(pool, low_bit, high_bit, values, base, l):
    """Encode ``values - base`` as EF with low width ``l`` at absolute bits."""
    for i in range(values.shape[0]):
        v = np.uint64(values[i] - base)
        if l:
            write_bits(pool, low_bit + i * l, l, v)
        set_bit(pool, high_bit + np.int64(v >> np.uint64(l)) + i)


@njit(**NJ)
def _check_monotone(values, u):
    prev = 0
    for i in range(values.shape[0]):
        v = values[i]
        if v < prev or v < 0 or v >= u:
            return i
        prev = v
    return -1


@njit(**NJ)
def _pef_fill(pool, o, values, bs, ubw, boffw, lw, bits):
    nb = lw.shape[0]
    ub_bit = (o + np.int64(pool[o + _P_UB])) * 64
    boff_bit = (o + np.int64(pool[o + _P_BOFF])) * 64
    data_bit = (o + np.int64(pool[o + _P_DATA])) * 64
    m = values.shape[0]
    off = 0
    base = 0
    for j in range(nb):
        lo = j * bs
        hi = min(m, lo + bs)
        ub = values[hi - 1]
        write_bits(pool, ub_bit + j * ubw, ubw, ub)
        write_bits(pool, boff_bit + j * boffw, boffw, off)
        l = lw[j]
        mj = hi - lo
        _ef_write(pool, data_bit + off, data_bit + off + mj * l, values[lo:hi], base, l)
        off += bits[j]
        base = ub


@njit(inline="always", **NJ)
def _ef_low_width(u, m):
    if m == 0 or u <= m:
        return 0
    return bit_length(np.uint64(u // m)) - 1


@njit(**NJ)
def seq_access(pool, o, i):
    """i-th value of the EF or PEF sequence whose blob starts at word ``o``."""
    if pool[o] == U0:
        l = np.int64(pool[o + _EF_L])
        low = U0
        if l:
            low = read_bits(pool, (o + np.int64(pool[o + _EF_LOW])) * 64 + i * l, l)
        hw = o + np.int64(pool[o + _EF_HIGH])
        p = _region_select(pool, hw, o + np.int64(pool[o + _EF_SAMP]), i)
        return np.int64((np.uint64(p - i) << np.uint64(l)) | low)
    bs = np.int64(pool[o + _P_B])
    m = np.int64(pool[o + _M])
    j = i // bs
    r = i - j * bs
    ubw = np.int64(pool[o + _P_UBW])
    ub_bit = (o + np.int64(pool[o + _P_UB])) * 64
    ub = np.int64(read_bits(pool, ub_bit + j * ubw, ubw))
    base = 0
    if j > 0:
        base = np.int64(read_bits(pool, ub_bit + (j - 1) * ubw, ubw))
    mj = min(bs, m - j * bs)
    l = _ef_low_width(ub - base + 1, mj)
    boffw = np.int64(pool[o + _P_BOFFW])
    boff = np.int64(read_bits(pool, (o + np.int64(pool[o + _P_BOFF])) * 64 + j * boffw, boffw))
    start = (o + np.int64(pool[o + _P_DATA])) * 64 + boff
    low = U0
    if l:
        low = read_bits(pool, start + r * l, l)
    hstart = start + mj * l
    p = scan_select(pool, hstart, r) - hstart
    return base + np.int64((np.uint64(p - r) << np.uint64(l)) | low)


SCAN_RANGE = 16


@njit(**NJ)
def _ef_scan_find(pool, o, b, e, x):
    """Sequential EF decode from position b: one select, then next-one steps."""
    l = np.int64(pool[o + _EF_L])
    low_bit = (o + np.int64(pool[o + _EF_LOW])) * 64
    hw = o + np.int64(pool[o + _EF_HIGH])
    p = _region_select(pool, hw, o + np.int64(pool[o + _EF_SAMP]), b)
    for i in range(b, e):
        if i > b:
            p = next_one(pool, hw * 64 + p + 1) - hw * 64
        low = U0
        if l:
            low = read_bits(pool, low_bit + i * l, l)
        v = np.int64((np.uint64(p - i) << np.uint64(l)) | low)
        if v >= x:
            return i if v == x else -1
    return -1


@njit(**NJ)
def _pef_find(pool, o, b, e, x):
    """seq_find on PEF: bisect block upper bounds, then search inside one block."""
    bs = np.int64(pool[o + _P_B])
    m = np.int64(pool[o + _M])
    ubw = np.int64(pool[o + _P_UBW])
    ub_bit = (o + np.int64(pool[o + _P_UB])) * 64
    lo = b // bs
    hi = (e - 1) // bs + 1
    while lo < hi:
        mid = (lo + hi) >> 1
        if np.int64(read_bits(pool, ub_bit + mid * ubw, ubw)) < x:
            lo = mid + 1
        else:
            hi = mid
    j = lo
    if j * bs >= e or j * bs >= m:
        return -1
    base = 0
    if j > 0:
        base = np.int64(read_bits(pool, ub_bit + (j - 1) * ubw, ubw))
    ub = np.int64(read_bits(pool, ub_bit + j * ubw, ubw))
    mj = min(bs, m - j * bs)
    l = _ef_low_width(ub - base + 1, mj)
    boffw = np.int64(pool[o + _P_BOFFW])
    boff = np.int64(read_bits(pool, (o + np.int64(pool[o + _P_BOFF])) * 64 + j * boffw, boffw))
    start = (o + np.int64(pool[o + _P_DATA])) * 64 + boff
    hstart = start + mj * l
    r_lo = max(b - j * bs, 0)
    r_hi = min(e - j * bs, mj)
    while r_lo < r_hi:
        r = (r_lo + r_hi) >> 1
        low = U0
        if l:
            low = read_bits(pool, start + r * l, l)
        p = scan_select(pool, hstart, r) - hstart
        if base + np.int64((np.uint64(p - r) << np.uint64(l)) | low) < x:
            r_lo = r + 1
        else:
            r_hi = r
    i = j * bs + r_lo
    if i < e and seq_access(pool, o, i) == x:
        return i
    return -1


@njit(**NJ)
def seq_find(pool, o, b, e, x):
    """Smallest p in [b, e) with seq[p] == x, else -1.

    Binary search; on EF it stops once the window is short and decodes the
    rest sequentially.
    """
    if b >= e:
        return -1
    if pool[o] == np.uint64(KIND_PEF):
        return _pef_find(pool, o, b, e, x)
    ef = pool[o] == U0
    lo = b
    hi = e
    while lo < hi and not (ef and hi - lo <= SCAN_RANGE):
        mid = (lo + hi) >> 1
        if seq_access(pool, o, mid) < x:
            lo = mid + 1
        else:
            hi = mid
    if ef and lo < e:
        return _ef_scan_find(pool, o, lo, min(hi + 1, e), x)
    if lo < e and seq_access(pool, o, lo) == x:
        return lo
    return -1


@njit(**NJ)
def seq_decode(pool, o):
    m = np.int64(pool[o + _M])
    out = np.empty(m, np.int64)
    for i in range(m):
        out[i] = seq_access(pool, o, i)
    return out


@njit(**NJ)
def _cw_fill(pool, o, idx):
    bw = o + np.int64(pool[o + _C_B])
    lw = o + np.int64(pool[o + _C_L])
    pos = 0
    for t in range(idx.shape[0]):
        i = idx[t]
        ln = bit_length(np.uint64(i + 2)) - 1
        c = i + 2 - (1 << ln)
        write_bits(pool, bw * 64 + pos, ln, c)
        set_bit(pool, lw * 64 + pos)
        pos += ln
    set_bit(pool, lw * 64 + pos)


@njit(**NJ)
def cw_access(pool, o, pos):
    lw = o + np.int64(pool[o + _C_L])
    b = _region_select(pool, lw, o + np.int64(pool[o + _C_SAMP]), pos)
    e = next_one(pool, lw * 64 + b + 1) - lw * 64
    ln = e - b
    c = np.int64(read_bits(pool, (o + np.int64(pool[o + _C_B])) * 64 + b, ln))
    return c + (1 << ln) - 2


@njit(**NJ)
def packed_access(pool, o, pos):
    w = np.int64(pool[o + _K_W])
    return np.int64(read_bits(pool, (o + np.int64(pool[o + _K_DATA])) * 64 + pos * w, w))


@njit(**NJ)
def _packed_fill(pool, o, vals, w):
    base = (o + np.int64(pool[o + _K_DATA])) * 64
    for i in range(vals.shape[0]):
        write_bits(pool, base + i * w, w, vals[i])


@njit(**NJ)
def _select_bv(words, samples, k):
    s = k // SAMPLE_RATE
    return scan_select(words, np.int64(samples[s]), k - s * SAMPLE_RATE)


@njit(**NJ)
def _bv_samples(words, nbits, out):
    seen = 0
    for p in range(nbits):
        if get_bit(words, p):
            if seen % SAMPLE_RATE == 0:
                out[seen // SAMPLE_RATE] = p
            seen += 1
    return seen


# ------------------------------------------------------------ bitvectors


class BitVector:
    """Append-only packed bit array."""

    def __init__(self, nbits_hint: int = 0):
        self.words = np.zeros(words_for(nbits_hint), np.uint64)
        self.length = 0

    @classmethod
    def from_bits(cls, bits) -> "BitVector":
        arr = np.asarray(bits, dtype=np.uint8).ravel()
        bv = cls(len(arr))
        packed = np.packbits(arr, bitorder="little")
        pad = (-len(packed)) % 8
        packed = np.concatenate([packed, np.zeros(pad + 8, np.uint8)])
        bv.words = packed.view("<u8").astype(np.uint64)
        bv.length = len(arr)
        return bv

    def append(self, bit: int) -> None:
        if self.length + 1 >= len(self.words) * 64 - 64:
            grown = np.zeros(max(2 * len(self.words), 4), np.uint64)
            grown[: len(self.words)] = self.words
            self.words = grown
        if bit:
            self.words[self.length >> 6] |= np.uint64(1) << np.uint64(self.length & 63)
        self.length += 1

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, p: int) -> int:
        if not 0 <= p < self.length:
            raise IndexError(p)
        return int((int(self.words[p >> 6]) >> (p & 63)) & 1)

    def popcount(self) -> int:
        full = np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.length]
        return int(full.sum())

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.words.view(np.uint8), bitorder="little")[: self.length]


class SelectIndex:
    """One sampled position every 1024 set bits."""

    def __init__(self, bv: BitVector):
        n = (bv.length + SAMPLE_RATE - 1) // SAMPLE_RATE + 1
        self.samples = np.zeros(n, np.int64)
        self.ones = int(_bv_samples(bv.words, bv.length, self.samples))
        self.bv = bv


def select1(bv: BitVector | SelectIndex, k: int) -> int:
    """Position of the (k+1)-th set bit."""
    idx = bv if isinstance(bv, SelectIndex) else SelectIndex(bv)
    if not 0 <= k < idx.ones:
        raise IndexError(f"rank {k} out of bounds for {idx.ones} set bits")
    return int(_select_bv(idx.bv.words, idx.samples, k))


# -------------------------------------------------------------- sequences


def _header(kind: int, **slots) -> np.ndarray:
    h = np.zeros(HEADER, np.uint64)
    h[0] = kind
    for k, v in slots.items():
        h[int(k[1:])] = v
    return h


class _Blob:
    kind = -1

    def __init__(self, blob: np.ndarray):
        self.blob = blob

    @property
    def size_bits(self) -> int:
        return 64 * len(self.blob)

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and np.array_equal(self.blob, other.blob)

    def __hash__(self):
        return hash(self.blob.tobytes())


class EliasFanoSequence(_Blob):
    kind = KIND_EF

    @property
    def m(self) -> int:
        return int(self.blob[_M])

    @property
    def u(self) -> int:
        return int(self.blob[_U])

    @property
    def low_width(self) -> int:
        return int(self.blob[_EF_L])

    def payload_bits(self) -> int:
        """Low bits plus high bits, without header and select samples."""
        return self.m * self.low_width + int(self.blob[_EF_HBITS])

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> int:
        return ef_access(self, i)

    def to_numpy(self) -> np.ndarray:
        return seq_decode(self.blob, 0)

    def serialize(self) -> bytes:
        b = self.blob
        low = b[int(b[_EF_LOW]) : int(b[_EF_HIGH])]
        high = b[int(b[_EF_HIGH]) : int(b[_EF_SAMP])]
        samp = b[int(b[_EF_SAMP]) :]
        out = io.BytesIO()
        out.write(b"EFSQ" + struct.pack("<HQQB", 1, self.m, self.u, self.low_width))
        out.write(struct.pack("<QQQQ", len(low), len(high), int(b[_EF_HBITS]), len(samp)))
        for a in (low, high, samp):
            out.write(a.astype("<u8").tobytes())
        return out.getvalue()

    @classmethod
    def deserialize(cls, data: bytes) -> "EliasFanoSequence":
        if data[:4] != b"EFSQ":
            raise EncodingError("bad EFSQ magic")
        _, m, u, l = struct.unpack_from("<HQQB", data, 4)
        nlow, nhigh, hbits, nsamp = struct.unpack_from("<QQQQ", data, 23)
        arr = np.frombuffer(data, "<u8", nlow + nhigh + nsamp, 55).astype(np.uint64)
        hdr = _header(KIND_EF, _1=m, _2=u, _3=l, _4=HEADER, _5=HEADER + nlow,
                      _6=hbits, _7=HEADER + nlow + nhigh, _8=nsamp)
        return cls(np.concatenate([hdr, arr]))


class PartitionedSequence(_Blob):
    kind = KIND_PEF

    @property
    def m(self) -> int:
        return int(self.blob[_M])

    @property
    def u(self) -> int:
        return int(self.blob[_U])

    @property
    def block_size(self) -> int:
        return int(self.blob[_P_B])

    @property
    def num_blocks(self) -> int:
        return int(self.blob[_P_NB])

    def payload_bits(self) -> int:
        nb = self.num_blocks
        return int(self.blob[_P_DBITS]) + nb * (int(self.blob[_P_UBW]) + int(self.blob[_P_BOFFW]))

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, i: int) -> int:
        return pef_access(self, i)

    def to_numpy(self) -> np.ndarray:
        return seq_decode(self.blob, 0)

    def serialize(self) -> bytes:
        b = self.blob
        out = io.BytesIO()
        out.write(b"EFSQ" + struct.pack("<HQQB", 1, self.m, self.u, 255))
        out.write(struct.pack("<IQB", self.block_size, self.num_blocks, int(b[_P_UBW])))
        out.write(struct.pack("<QQ", int(b[_P_BOFFW]), int(b[_P_DBITS])))
        body = b[HEADER:]
        out.write(struct.pack("<QQQ", int(b[_P_BOFF]) - HEADER, int(b[_P_DATA]) - HEADER, len(body)))
        out.write(body.astype("<u8").tobytes())
        return out.getvalue()

    @classmethod
    def deserialize(cls, data: bytes) -> "PartitionedSequence":
        if data[:4] != b"EFSQ":
            raise EncodingError("bad EFSQ magic")
        _, m, u, _l = struct.unpack_from("<HQQB", data, 4)
        bs, nb, ubw = struct.unpack_from("<IQB", data, 23)
        boffw, dbits = struct.unpack_from("<QQ", data, 36)
        rb, rd, n = struct.unpack_from("<QQQ", data, 52)
        body = np.frombuffer(data, "<u8", n, 76).astype(np.uint64)
        hdr = _header(KIND_PEF, _1=m, _2=u, _3=bs, _4=nb, _5=ubw, _6=HEADER,
                      _7=HEADER + rb, _8=boffw, _9=HEADER + rd, _10=dbits)
        return cls(np.concatenate([hdr, body]))


def _as_values(values) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.int64).ravel())
    return arr


def _validate(arr: np.ndarray, u: int) -> None:
    bad = _check_monotone(arr, max(u, 1))
    if bad >= 0:
        prev = arr[bad - 1] if bad else None
        raise EncodingError(
            f"value {int(arr[bad])} at position {bad} breaks monotonicity or universe "
            f"(previous={prev}, u={u})"
        )


def ef_build(values, u: int) -> EliasFanoSequence:
    """Encode a nondecreasing sequence of values < max(u, 1)."""
    arr = _as_values(values)
    u = int(u)
    m = len(arr)
    _validate(arr, u)
    l = int(_ef_low_width(u, m))
    hbits = m + ((u - 1) >> l) + 1 if m else 0
    nlow = words_for(m * l)
    nhigh = words_for(hbits)
    nsamp = (m + SAMPLE_RATE - 1) // SAMPLE_RATE
    total = HEADER + nlow + nhigh + nsamp
    blob = np.zeros(total, np.uint64)
    blob[:HEADER] = _header(KIND_EF, _1=m, _2=u, _3=l, _4=HEADER, _5=HEADER + nlow,
                            _6=hbits, _7=HEADER + nlow + nhigh, _8=nsamp)
    if m:
        _ef_write(blob, HEADER * 64, (HEADER + nlow) * 64, arr, 0, l)
        _fill_samples(blob, HEADER + nlow, hbits, HEADER + nlow + nhigh)
    return EliasFanoSequence(blob)


def pef_build(values, u: int, block_size: int = 128) -> PartitionedSequence:
    """Uniformly partitioned EF with blocks of ``block_size`` elements."""
    if block_size < 1:
        raise EncodingError("block_size must be >= 1")
    arr = _as_values(values)
    u = int(u)
    m = len(arr)
    _validate(arr, u)
    nb = (m + block_size - 1) // block_size
    lw = np.zeros(nb, np.int64)
    bits = np.zeros(nb, np.int64)
    if nb:
        ends = np.minimum(np.arange(1, nb + 1) * block_size, m)
        ub = arr[ends - 1]
        base = np.concatenate([[0], ub[:-1]])
        mj = ends - np.arange(nb) * block_size
        uj = ub - base + 1
        q = uj // mj
        lw = np.where(uj > mj, np.floor(np.log2(np.maximum(q, 1))).astype(np.int64), 0)
        # guard against float rounding in log2
        lw = np.where((uj > mj) & (np.left_shift(1, lw + 1) <= q), lw + 1, lw)
        lw = np.where((uj > mj) & (np.left_shift(1, lw) > q), lw - 1, lw)
        bits = mj * lw + mj + ((uj - 1) >> lw) + 1
    dbits = int(bits.sum())
    ubw = max(1, int(u - 1).bit_length()) if u > 1 else 1
    boffw = max(1, dbits.bit_length())
    n_ub = words_for(nb * ubw)
    n_boff = words_for(nb * boffw)
    n_data = words_for(dbits)
    blob = np.zeros(HEADER + n_ub + n_boff + n_data, np.uint64)
    blob[:HEADER] = _header(KIND_PEF, _1=m, _2=u, _3=block_size, _4=nb, _5=ubw, _6=HEADER,
                            _7=HEADER + n_ub, _8=boffw, _9=HEADER + n_ub + n_boff, _10=dbits)
    if nb:
        _pef_fill(blob, 0, arr, block_size, ubw, boffw, lw, bits)
    return PartitionedSequence(blob)


def _check_index(seq, i: int) -> int:
    i = int(i)
    if not 0 <= i < seq.m:
        raise IndexError(f"position {i} out of range for sequence of length {seq.m}")
    return i


def ef_access(seq: EliasFanoSequence, i: int) -> int:
    return int(seq_access(seq.blob, 0, _check_index(seq, i)))


def pef_access(seq: PartitionedSequence, i: int) -> int:
    return int(seq_access(seq.blob, 0, _check_index(seq, i)))


def ef_find(seq, b: int, e: int, x: int) -> int | None:
    """Position of the first ``x`` in ``seq[b:e]`` or None."""
    if not 0 <= b <= e <= seq.m:
        raise IndexError(f"range [{b}, {e}) outside [0, {seq.m}]")
    p = int(seq_find(seq.blob, 0, int(b), int(e), int(x)))
    return None if p < 0 else p


# ------------------------------------------------------------- codewords


def cw_encode(i: int) -> tuple[int, int]:
    """(codeword, length) with length = floor(log2(i+2)), c = i + 2 - 2**length."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    ln = (i + 2).bit_length() - 1
    return i + 2 - (1 << ln), ln


def cw_decode(c: int, length: int) -> int:
    return c + (1 << length) - 2


class CodewordArray(_Blob):
    kind = KIND_CW

    @property
    def count(self) -> int:
        return int(self.blob[_M])

    m = count

    @property
    def codeword_bits(self) -> int:
        return int(self.blob[_C_BBITS])

    def payload_bits(self) -> int:
        # B plus L (one boundary bit per codeword and a terminator)
        return 2 * self.codeword_bits + 1

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, pos: int) -> int:
        return cwarray_access(self, pos)


def cwarray_build(indexes) -> CodewordArray:
    idx = _as_values(indexes)
    if len(idx) and idx.min() < 0:
        raise EncodingError("codeword indexes must be nonnegative")
    lens = np.floor(np.log2(idx + 2)).astype(np.int64) if len(idx) else idx
    nbits = int(lens.sum())
    nB = words_for(nbits)
    nL = words_for(nbits + 1)
    nsamp = (len(idx) + 1 + SAMPLE_RATE - 1) // SAMPLE_RATE
    blob = np.zeros(HEADER + nB + nL + nsamp, np.uint64)
    blob[:HEADER] = _header(KIND_CW, _1=len(idx), _2=nbits, _3=HEADER, _4=HEADER + nB,
                            _5=HEADER + nB + nL, _6=nsamp)
    _cw_fill(blob, 0, idx)
    _fill_samples(blob, HEADER + nB, nbits + 1, HEADER + nB + nL)
    return CodewordArray(blob)


def cwarray_access(arr: CodewordArray, pos: int) -> int:
    return int(cw_access(arr.blob, 0, _check_index(arr, pos)))


class PackedArray(_Blob):
    """Fixed-width bit-packed integers."""

    kind = KIND_PACKED

    @property
    def m(self) -> int:
        return int(self.blob[_M])

    @property
    def width(self) -> int:
        return int(self.blob[_K_W])

    def payload_bits(self) -> int:
        return self.m * self.width

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, pos: int) -> int:
        return int(packed_access(self.blob, 0, _check_index(self, pos)))

    @classmethod
    def build(cls, values, width: int) -> "PackedArray":
        vals = _as_values(values)
        if len(vals) and (vals.min() < 0 or int(vals.max()).bit_length() > width):
            raise EncodingError(f"values do not fit in {width} bits")
        n = words_for(len(vals) * width)
        blob = np.zeros(HEADER + n, np.uint64)
        blob[:HEADER] = _header(KIND_PACKED, _1=len(vals), _2=width, _3=HEADER)
        _packed_fill(blob, 0, vals, width)
        return cls(blob)


_KINDS = {
    KIND_EF: EliasFanoSequence,
    KIND_PEF: PartitionedSequence,
    KIND_CW: CodewordArray,
    KIND_PACKED: PackedArray,
}


def load_blob(blob: np.ndarray):
    """Wrap a raw blob in the class named by its kind word."""
    return _KINDS[int(blob[0])](blob)
