"""N-gram records, orderings, sorted block files and merging.

A block is held in memory as a pair ``(words, counts)``: ``words`` is a
``(m, N)`` uint32 matrix (column ``j`` holds w_{j+1}) and ``counts`` a ``(m,)``
uint64 vector.  Two orderings matter:

* suffix order compares ``(w_N, w_{N-1}, ..., w_1)``;
* context order compares ``(w_{N-1}, ..., w_1, w_N)``.

Both are expressed as a *key permutation*: the list of columns compared
left to right.  Every kernel below takes the permutation rather than the
ordering name.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numba import njit, prange

from ._bits import NJ
from .errors import CorruptionError

UNSORTED, SUFFIX, CONTEXT = 0, 1, 2
ORDER_NAMES = {"unsorted": UNSORTED, "suffix": SUFFIX, "context": CONTEXT}
RAW, FC_BYTE, FC_BIT = 0, 1, 2
ENCODING_NAMES = {"off": RAW, "raw": RAW, "byte": FC_BYTE, "bit": FC_BIT}
MAGIC = b"NGBK"
VERSION = 1
DEFAULT_WINDOW = 64 << 20
MAX_FANIN = 256
_HDR = struct.Struct("<4sHBQBIB")


@dataclass(frozen=True)
class NGramRecord:
    words: tuple
    count: int = 1

    @property
    def N(self) -> int:
        return len(self.words)


def key_perm(N: int, ordering: int | str) -> np.ndarray:
    """Column comparison order for an ordering."""
    if isinstance(ordering, str):
        ordering = ORDER_NAMES[ordering]
    if ordering == SUFFIX:
        return np.arange(N - 1, -1, -1, dtype=np.int64)
    if ordering == CONTEXT:
        return np.array(list(range(N - 2, -1, -1)) + [N - 1], dtype=np.int64)
    return np.arange(N, dtype=np.int64)


def _words_of(r) -> tuple:
    return tuple(r.words) if isinstance(r, NGramRecord) else tuple(r)


def _cmp_by(a, b, perm) -> int:
    a, b = _words_of(a), _words_of(b)
    if len(a) != len(b):
        raise ValueError("records of different order")
    for c in perm:
        if a[c] != b[c]:
            return -1 if a[c] < b[c] else 1
    return 0


def cmp_suffix(a, b) -> int:
    """Compare by (w_N, ..., w_1)."""
    return _cmp_by(a, b, key_perm(len(_words_of(a)), SUFFIX))


def cmp_context(a, b) -> int:
    """Compare by (w_{N-1}, ..., w_1, w_N)."""
    return _cmp_by(a, b, key_perm(len(_words_of(a)), CONTEXT))


def sort_order(words: np.ndarray, ordering) -> np.ndarray:
    """Stable argsort of rows under an ordering (comparison-free lexsort)."""
    perm = key_perm(words.shape[1], ordering)
    return np.lexsort(tuple(words[:, c] for c in perm[::-1]))


# -------------------------------------------------------------- radix sort


@njit(parallel=True, cache=True)
def _radix_pass(src_w, src_c, dst_w, dst_c, col, V, K):
    m = src_w.shape[0]
    chunk = (m + K - 1) // K
    table = np.zeros((K + 1, V), np.int64)
    for k in prange(K):
        lo = k * chunk
        hi = min(m, lo + chunk)
        for i in range(lo, hi):
            table[k + 1, src_w[i, col]] += 1
    # column-major exclusive prefix sums: value-major, worker-minor
    run = 0
    for v in range(V):
        for k in range(K):
            c = table[k + 1, v]
            table[k + 1, v] = run
            run += c
    for k in prange(K):
        lo = k * chunk
        hi = min(m, lo + chunk)
        for i in range(lo, hi):
            v = src_w[i, col]
            p = table[k + 1, v]
            table[k + 1, v] = p + 1
            for j in range(src_w.shape[1]):
                dst_w[p, j] = src_w[i, j]
            dst_c[p] = src_c[i]


def radix_sort_context(words: np.ndarray, counts: np.ndarray, workers: int = 1,
                       V: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stable LSD radix sort into context order.

    Passes run on w_N, then w_1, w_2, ..., w_{N-1}.  Each pass is a counting
    sort whose records are split across ``workers`` with a shared
    (workers+1) x V counter table.
    """
    words = np.ascontiguousarray(words, dtype=np.uint32)
    counts = np.ascontiguousarray(counts, dtype=np.uint64)
    m, N = words.shape
    if m <= 1:
        return words.copy(), counts.copy()
    if V is None:
        V = int(words.max()) + 1
    K = max(1, min(int(workers), m))
    cols = [N - 1] + list(range(0, N - 1))
    a_w, a_c = words.copy(), counts.copy()
    b_w, b_c = np.empty_like(words), np.empty_like(counts)
    for col in cols:
        _radix_pass(a_w, a_c, b_w, b_c, col, V, K)
        a_w, b_w = b_w, a_w
        a_c, b_c = b_c, a_c
    return a_w, a_c


# ------------------------------------------------------------ front coding


@njit(inline="always", **NJ)
def _put(buf, p, v, nbytes):
    for t in range(nbytes):
        buf[p + t] = np.uint8((v >> np.uint64(8 * t)) & np.uint64(0xFF))
    return p + nbytes


@njit(inline="always", **NJ)
def _get(buf, p, nbytes):
    v = np.uint64(0)
    for t in range(nbytes):
        v |= np.uint64(buf[p + t]) << np.uint64(8 * t)
    return v


@njit(inline="always", **NJ)
def _putbits(buf, bp, v, nbits):
    for t in range(nbits):
        if (v >> np.uint64(t)) & np.uint64(1):
            q = bp + t
            buf[q >> 3] |= np.uint8(1 << (q & 7))
    return bp + nbits


@njit(inline="always", **NJ)
def _getbits(buf, bp, nbits):
    v = np.uint64(0)
    for t in range(nbits):
        q = bp + t
        if (buf[q >> 3] >> (q & 7)) & 1:
            v |= np.uint64(1) << np.uint64(t)
    return v


@njit(**NJ)
def _shared(words, i, perm):
    n = perm.shape[0]
    l = 0
    while l < n and words[i - 1, perm[l]] == words[i, perm[l]]:
        l += 1
    return l


@njit(**NJ)
def _fc_encode(words, counts, perm, wid, wcnt, bitmode, out):
    """Encode a window body into ``out``; returns bytes used."""
    m = words.shape[0]
    N = perm.shape[0]
    if bitmode:
        lbits = 1
        while (1 << lbits) <= N:
            lbits += 1
        bp = 0
        for i in range(m):
            l = 0
            if i > 0:
                l = _shared(words, i, perm)
                bp = _putbits(out, bp, np.uint64(l), lbits)
            for t in range(l, N):
                bp = _putbits(out, bp, np.uint64(words[i, perm[t]]), wid)
            bp = _putbits(out, bp, counts[i], wcnt)
        return (bp + 7) >> 3
    p = 0
    for i in range(m):
        l = 0
        if i > 0:
            l = _shared(words, i, perm)
            out[p] = np.uint8(l)
            p += 1
        for t in range(l, N):
            p = _put(out, p, np.uint64(words[i, perm[t]]), wid)
        p = _put(out, p, counts[i], wcnt)
    return p


@njit(**NJ)
def _fc_decode(buf, start, m, N, perm, wid, wcnt, bitmode, words, counts):
    if bitmode:
        lbits = 1
        while (1 << lbits) <= N:
            lbits += 1
        bp = start * 8
        for i in range(m):
            l = 0
            if i > 0:
                l = np.int64(_getbits(buf, bp, lbits))
                bp += lbits
                for t in range(l):
                    words[i, perm[t]] = words[i - 1, perm[t]]
            for t in range(l, N):
                words[i, perm[t]] = np.uint32(_getbits(buf, bp, wid))
                bp += wid
            counts[i] = _getbits(buf, bp, wcnt)
            bp += wcnt
        return (bp + 7) >> 3
    p = start
    for i in range(m):
        l = 0
        if i > 0:
            l = np.int64(buf[p])
            p += 1
            if l > N:
                return -1
            for t in range(l):
                words[i, perm[t]] = words[i - 1, perm[t]]
        for t in range(l, N):
            words[i, perm[t]] = np.uint32(_get(buf, p, wid))
            p += wid
        counts[i] = _get(buf, p, wcnt)
        p += wcnt
    return p


def _nbytes(x: int) -> int:
    return max(1, (int(x).bit_length() + 7) // 8)


@dataclass
class FCWindow:
    """One front-coded window: header fields plus the encoded body."""

    n: int
    N: int
    width_id: int
    width_count: int
    bitmode: bool
    body: bytes
    ordering: int = CONTEXT

    def to_bytes(self) -> bytes:
        return struct.pack("<IBB", self.n, self.width_id, self.width_count) + self.body


def fc_compress_window(words: np.ndarray, counts: np.ndarray, ordering=CONTEXT,
                       bitmode: bool = False) -> FCWindow:
    words = np.ascontiguousarray(words, dtype=np.uint32)
    counts = np.ascontiguousarray(counts, dtype=np.uint64)
    m, N = words.shape
    perm = key_perm(N, ordering)
    mw = int(words.max()) if m else 0
    mc = int(counts.max()) if m else 0
    if bitmode:
        wid, wcnt = max(1, mw.bit_length()), max(1, mc.bit_length())
    else:
        wid, wcnt = _nbytes(mw), _nbytes(mc)
    cap = m * (1 + N * 4 + 8) + 16
    out = np.zeros(cap, np.uint8)
    used = _fc_encode(words, counts, perm, wid, wcnt, bitmode, out)
    return FCWindow(m, N, wid, wcnt, bitmode, out[:used].tobytes(),
                    ORDER_NAMES[ordering] if isinstance(ordering, str) else ordering)


def fc_decompress_window(win: FCWindow) -> tuple[np.ndarray, np.ndarray]:
    words = np.zeros((win.n, win.N), np.uint32)
    counts = np.zeros(win.n, np.uint64)
    buf = np.frombuffer(win.body + b"\0" * 16, np.uint8)
    r = _fc_decode(buf, 0, win.n, win.N, key_perm(win.N, win.ordering), win.width_id,
                   win.width_count, win.bitmode, words, counts)
    if r < 0:
        raise CorruptionError("front-coded window holds an invalid shared-prefix length")
    return words, counts


# ------------------------------------------------------------- block files


@dataclass
class IOCounter:
    """Tmp-dir write accounting, grouped by a caller-chosen tag."""

    bytes_written: dict = field(default_factory=dict)
    records_written: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def add(self, tag: str, nbytes: int, nrecords: int, order: int) -> None:
        self.bytes_written[tag] = self.bytes_written.get(tag, 0) + nbytes
        key = (tag, order)
        self.records_written[key] = self.records_written.get(key, 0) + nrecords

    def records_of_order(self, order: int) -> int:
        return sum(v for (t, n), v in self.records_written.items() if n == order)

    def total_bytes(self) -> int:
        return sum(self.bytes_written.values())


@dataclass
class BlockHeader:
    N: int
    count: int
    encoding: int
    window: int
    ordering: int


class BlockWriter:
    """Streams records into a BlockFile, window by window."""

    def __init__(self, path: str, N: int, encoding: int | str = FC_BYTE,
                 window_bytes: int = DEFAULT_WINDOW, ordering: int | str = CONTEXT,
                 io_counter: IOCounter | None = None, tag: str = "block"):
        self.path = path
        self.N = N
        self.encoding = ENCODING_NAMES[encoding] if isinstance(encoding, str) else encoding
        self.ordering = ORDER_NAMES[ordering] if isinstance(ordering, str) else ordering
        self.window_bytes = int(window_bytes)
        self.per_window = max(1, self.window_bytes // (4 * N + 8))
        self.count = 0
        self.io = io_counter
        self.tag = tag
        self._fh = open(path, "wb")
        self._fh.write(_HDR.pack(MAGIC, VERSION, N, 0, self.encoding,
                                 min(self.window_bytes, 0xFFFFFFFF), self.ordering))
        self._last = None

    def write(self, words: np.ndarray, counts: np.ndarray) -> None:
        words = np.ascontiguousarray(words, dtype=np.uint32).reshape(-1, self.N)
        counts = np.ascontiguousarray(counts, dtype=np.uint64)
        for lo in range(0, len(words), self.per_window):
            self._window(words[lo:lo + self.per_window], counts[lo:lo + self.per_window])

    def _window(self, w: np.ndarray, c: np.ndarray) -> None:
        if not len(w):
            return
        if self.encoding == RAW:
            body = struct.pack("<I", len(w)) + w.astype("<u4").tobytes() + c.astype("<u8").tobytes()
        else:
            body = fc_compress_window(w, c, self.ordering, self.encoding == FC_BIT).to_bytes()
        self._fh.write(struct.pack("<Q", len(body)))
        self._fh.write(body)
        self.count += len(w)
        if self.io is not None:
            self.io.add(self.tag, 8 + len(body), len(w), self.N)

    def close(self) -> str:
        self._fh.seek(7)
        self._fh.write(struct.pack("<Q", self.count))
        self._fh.close()
        if self.io is not None:
            self.io.bytes_written[self.tag] = self.io.bytes_written.get(self.tag, 0) + _HDR.size
            self.io.files.append(self.path)
        return self.path

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if not self._fh.closed:
            self.close()


class BlockFile:
    """Reader over a BlockFile; windows decode one at a time."""

    def __init__(self, path: str):
        self.path = path
        with open(path, "rb") as fh:
            raw = fh.read(_HDR.size)
        if len(raw) < _HDR.size:
            raise CorruptionError(f"{path}: truncated header")
        magic, ver, N, count, enc, win, order = _HDR.unpack(raw)
        if magic != MAGIC:
            raise CorruptionError(f"{path}: bad magic {magic!r}")
        self.header = BlockHeader(N, count, enc, win, order)

    @property
    def N(self) -> int:
        return self.header.N

    def __len__(self) -> int:
        return self.header.count

    def windows(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        h = self.header
        perm = key_perm(h.N, h.ordering)
        seen = 0
        with open(self.path, "rb") as fh:
            fh.seek(_HDR.size)
            while True:
                lb = fh.read(8)
                if not lb:
                    break
                (ln,) = struct.unpack("<Q", lb)
                body = fh.read(ln)
                if len(body) != ln:
                    raise CorruptionError(f"{self.path}: truncated window")
                if h.encoding == RAW:
                    (n,) = struct.unpack_from("<I", body)
                    w = np.frombuffer(body, "<u4", n * h.N, 4).reshape(n, h.N).astype(np.uint32)
                    c = np.frombuffer(body, "<u8", n, 4 + 4 * n * h.N).astype(np.uint64)
                else:
                    n, wid, wcnt = struct.unpack_from("<IBB", body)
                    buf = np.frombuffer(body + b"\0" * 16, np.uint8)
                    w = np.zeros((n, h.N), np.uint32)
                    c = np.zeros(n, np.uint64)
                    if _fc_decode(buf, 6, n, h.N, perm, wid, wcnt, h.encoding == FC_BIT, w, c) < 0:
                        raise CorruptionError(f"{self.path}: bad front-coded window")
                seen += n
                yield w, c
        if seen != h.count:
            raise CorruptionError(f"{self.path}: header declares {h.count} records, found {seen}")

    def read_all(self) -> tuple[np.ndarray, np.ndarray]:
        parts = list(self.windows())
        if not parts:
            return np.zeros((0, self.N), np.uint32), np.zeros(0, np.uint64)
        return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])

    def size_bytes(self) -> int:
        return os.path.getsize(self.path)


def write_block(path: str, words, counts, **kw) -> BlockFile:
    words = np.asarray(words, dtype=np.uint32)
    with BlockWriter(path, words.shape[1], **kw) as w:
        w.write(words, counts)
    return BlockFile(path)


# ------------------------------------------------------------------ merging


@njit(**NJ)
def _cmp_rows(wa, ia, wb, ib, perm):
    for t in range(perm.shape[0]):
        c = perm[t]
        x = wa[ia, c]
        y = wb[ib, c]
        if x < y:
            return -1
        if x > y:
            return 1
    return 0


@njit(**NJ)
def _less(words, pos, ra, rb, perm):
    c = _cmp_rows(words, pos[ra], words, pos[rb], perm)
    if c != 0:
        return c < 0
    return ra < rb


@njit(**NJ)
def _kmerge(words, counts, starts, perm, combine, out_w, out_c):
    """Heap merge of sorted runs; returns records emitted or -(run+1) on disorder."""
    k = starts.shape[0] - 1
    pos = starts[:-1].copy()
    heap = np.empty(k, np.int64)
    hn = 0
    for r in range(k):
        if pos[r] < starts[r + 1]:
            heap[hn] = r
            hn += 1
            j = hn - 1
            while j > 0:
                par = (j - 1) >> 1
                if _less(words, pos, heap[j], heap[par], perm):
                    heap[j], heap[par] = heap[par], heap[j]
                    j = par
                else:
                    break
    nout = 0
    N = words.shape[1]
    while hn > 0:
        r = heap[0]
        i = pos[r]
        if combine and nout > 0 and _cmp_rows(out_w, nout - 1, words, i, perm) == 0:
            out_c[nout - 1] += counts[i]
        else:
            for t in range(N):
                out_w[nout, t] = words[i, t]
            out_c[nout] = counts[i]
            nout += 1
        pos[r] += 1
        if pos[r] < starts[r + 1]:
            if _cmp_rows(words, i, words, pos[r], perm) > 0:
                return -(r + 1)
        else:
            hn -= 1
            heap[0] = heap[hn]
        j = 0
        while True:
            a = 2 * j + 1
            if a >= hn:
                break
            b = a + 1
            s = a
            if b < hn and _less(words, pos, heap[b], heap[a], perm):
                s = b
            if _less(words, pos, heap[s], heap[j], perm):
                heap[s], heap[j] = heap[j], heap[s]
                j = s
            else:
                break
    return nout


@njit(**NJ)
def _first_disorder(words, perm):
    for i in range(1, words.shape[0]):
        if _cmp_rows(words, i - 1, words, i, perm) > 0:
            return i
    return -1


def merge_arrays(runs: Sequence[tuple[np.ndarray, np.ndarray]], ordering=CONTEXT,
                 combine: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """k-way merge of in-memory sorted runs."""
    runs = [r for r in runs if len(r[0])]
    if not runs:
        N = 1
        return np.zeros((0, N), np.uint32), np.zeros(0, np.uint64)
    N = runs[0][0].shape[1]
    words = np.ascontiguousarray(np.concatenate([r[0] for r in runs]), dtype=np.uint32)
    counts = np.ascontiguousarray(np.concatenate([r[1] for r in runs]), dtype=np.uint64)
    starts = np.zeros(len(runs) + 1, np.int64)
    np.cumsum([len(r[0]) for r in runs], out=starts[1:])
    out_w = np.empty_like(words)
    out_c = np.empty_like(counts)
    n = _kmerge(words, counts, starts, key_perm(N, ordering), combine, out_w, out_c)
    if n < 0:
        raise CorruptionError(f"input run {-n - 1} is not sorted")
    return out_w[:n], out_c[:n]


def _last_le(words, key_w, perm) -> int:
    """Number of leading rows of ``words`` that compare <= row 0 of ``key_w``."""
    lo, hi = 0, len(words)
    while lo < hi:
        mid = (lo + hi) // 2
        if _cmp_rows(words, mid, key_w, 0, perm) <= 0:
            lo = mid + 1
        else:
            hi = mid
    return lo


def merge_blocks(files: Sequence[BlockFile | str], ordering=CONTEXT, combine: bool = True,
                 tmp_dir: str | None = None, io_counter: IOCounter | None = None,
                 encoding=FC_BYTE) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Globally sorted stream of record chunks from sorted block files.

    Each round merges, across all streams, every buffered record not greater
    than the smallest buffered window maximum.  The final record of a round
    is held back so duplicates spanning rounds still combine.  More than 256
    inputs are merged hierarchically through intermediate files.
    """
    files = [f if isinstance(f, BlockFile) else BlockFile(f) for f in files]
    if len(files) > MAX_FANIN:
        if tmp_dir is None:
            tmp_dir = os.path.dirname(files[0].path) or "."
        merged = []
        for g in range(0, len(files), MAX_FANIN):
            path = os.path.join(tmp_dir, f"merge-{os.getpid()}-{g // MAX_FANIN}.ngbk")
            with BlockWriter(path, files[0].N, encoding, ordering=ordering,
                             io_counter=io_counter, tag="merge-scratch") as w:
                for cw, cc in merge_blocks(files[g:g + MAX_FANIN], ordering, combine):
                    w.write(cw, cc)
            merged.append(BlockFile(path))
        yield from merge_blocks(merged, ordering, combine)
        return
    if not files:
        return
    N = files[0].N
    perm = key_perm(N, ordering)
    its = [f.windows() for f in files]
    bufs: list = [None] * len(files)
    last_seen: list = [None] * len(files)
    carry = None
    while True:
        for s, it in enumerate(its):
            if it is not None and (bufs[s] is None or len(bufs[s][0]) == 0):
                nxt = next(it, None)
                if nxt is None:
                    its[s] = None
                    bufs[s] = None
                else:
                    if last_seen[s] is not None and len(nxt[0]) and \
                            _cmp_rows(last_seen[s], 0, nxt[0], 0, perm) > 0:
                        raise CorruptionError(f"{files[s].path}: windows out of order")
                    if _first_disorder(nxt[0], perm) >= 0:
                        raise CorruptionError(f"{files[s].path}: unsorted window")
                    bufs[s] = nxt
                    last_seen[s] = nxt[0][-1:].copy()
        live = [s for s in range(len(files)) if bufs[s] is not None and len(bufs[s][0])]
        if not live:
            break
        bound = None
        for s in live:
            tail = bufs[s][0][-1:]
            if bound is None or _cmp_rows(tail, 0, bound, 0, perm) < 0:
                bound = tail
        runs = [carry] if carry is not None else []
        for s in live:
            w, c = bufs[s]
            k = _last_le(w, bound, perm)
            runs.append((w[:k], c[:k]))
            bufs[s] = (w[k:], c[k:])
        mw, mc = merge_arrays(runs, ordering, combine)
        if len(mw) > 1:
            yield mw[:-1], mc[:-1]
        carry = (mw[-1:], mc[-1:])
    if carry is not None:
        yield carry


def combine_sorted(words: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum counts of adjacent equal rows."""
    if len(words) == 0:
        return words, counts
    diff = np.any(words[1:] != words[:-1], axis=1)
    starts = np.concatenate([[0], np.nonzero(diff)[0] + 1])
    return words[starts], np.add.reduceat(counts, starts).astype(np.uint64)


__all__ = [
    "NGramRecord", "BlockFile", "BlockWriter", "FCWindow", "IOCounter",
    "cmp_suffix", "cmp_context", "key_perm", "sort_order", "radix_sort_context",
    "fc_compress_window", "fc_decompress_window", "merge_blocks", "merge_arrays",
    "combine_sorted", "write_block", "SUFFIX", "CONTEXT", "UNSORTED", "RAW", "FC_BYTE", "FC_BIT",
]
