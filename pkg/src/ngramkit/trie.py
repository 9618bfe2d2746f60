"""Compressed sorted-array trie over n-grams.

Level ``n`` holds one entry per stored n-gram path.  Three sequences per
level:

``ids``
    the last path token of every entry, turned into one monotone sequence by
    range-wise prefix sums: the entries of sibling range ``[b, e)`` store
    ``label + stored[b - 1]`` (or just ``label`` when ``b == 0``).  Encoded
    as a partitioned Elias-Fano sequence.  Level 1 has no ids: the position
    of a unigram is its vocabulary id.
``pointers``
    ``size + 1`` offsets delimiting each entry's children on the next level
    (Elias-Fano).
``values``
    counts (index into a per-level array of distinct counts, sorted by
    descending use) or quantized probability/backoff pairs.

With remapping order ``k > 0``, labels on levels above ``k + 1`` are
replaced by the rank of the token among the followers of its length-``k``
context, which shrinks the universe of those levels.

All sequences live in one ``uint64`` pool; kernels address them by offset.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._bits import NJ
from .errors import BuildError
from .succinct import (
    HEADER,
    PackedArray,
    cw_access,
    cwarray_build,
    ef_build,
    load_blob,
    packed_access,
    pef_build,
    seq_access,
    seq_find,
)
from .vocabulary import Vocabulary

FORWARD, REVERSED = 0, 1
COUNTS, PROBS = 0, 1
CW, PS_EF, PS_PEF = 0, 1, 2
COUNT_ENCODINGS = {"cw": CW, "ps-ef": PS_EF, "ps-pef": PS_PEF}
MAGIC = b"TRIE"
VERSION = 1


# --------------------------------------------------------------- quantizer


@dataclass
class Quantizer:
    """Binning quantizer: representatives are bin means, nondecreasing."""

    q: int
    codebook: np.ndarray  # float32

    def decode(self, idx) -> np.ndarray:
        return self.codebook[np.asarray(idx)]


def quantize_binning(values, q: int) -> tuple[Quantizer, np.ndarray]:
    """Sort, cut into 2**q equal-size bins, represent each bin by its mean."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    if not len(vals):
        raise ValueError("cannot quantize an empty value list")
    if not 1 <= q <= 32:
        raise ValueError("q must be in [1, 32]")
    n = len(vals)
    order = np.argsort(vals, kind="stable")
    width = max(1, -(-n // (1 << q)))
    rank_bin = np.arange(n) // width
    nb = int(rank_bin[-1]) + 1
    sums = np.bincount(rank_bin, weights=vals[order], minlength=nb)
    sizes = np.bincount(rank_bin, minlength=nb)
    codebook = (sums / sizes).astype(np.float32)
    # float32 rounding of means keeps order, but enforce it for equal-mean ties
    codebook = np.maximum.accumulate(codebook)
    idx = np.empty(n, np.int64)
    idx[order] = rank_bin
    return Quantizer(q, codebook), idx


def unique_by_frequency(values) -> tuple[np.ndarray, np.ndarray]:
    """(distinct values sorted by descending use then value, index per input)."""
    vals = np.asarray(values)
    uniq, inv, cnt = np.unique(vals, return_inverse=True, return_counts=True)
    order = np.lexsort((uniq, -cnt))
    rank = np.empty(len(uniq), np.int64)
    rank[order] = np.arange(len(uniq))
    return uniq[order], rank[inv.ravel()]


# ---------------------------------------------------------------- kernels


@njit(**NJ)
def trie_search(pool, ids_off, ptr_off, size1, ids, i, j, remapping):
    """Walk path ids[i..j] from level 1; position at level j-i+1, or -1.

    With ``remapping`` the result is the position within its sibling range.
    """
    p = ids[i]
    if p < 0 or p >= size1:
        return -1
    b = 0
    for s in range(1, j - i + 1):
        po = ptr_off[s]
        b = seq_access(pool, po, p)
        e = seq_access(pool, po, p + 1)
        if b == e:
            return -1
        io_ = ids_off[s + 1]
        base = 0
        if b > 0:
            base = seq_access(pool, io_, b - 1)
        x = ids[i + s]
        if x < 0:
            return -1
        p = seq_find(pool, io_, b, e, x + base)
        if p < 0:
            return -1
    if remapping:
        return p - b
    return p


@njit(**NJ)
def trie_locate(pool, ids_off, ptr_off, size1, k, ids, scratch):
    """Position of a full path at level len(ids), applying remapping."""
    n = ids.shape[0]
    for t in range(n):
        scratch[t] = ids[t]
    if k > 0:
        for t in range(k + 1, n):
            r = trie_search(pool, ids_off, ptr_off, size1, ids, t - k, t, True)
            if r < 0:
                return -1
            scratch[t] = r
    return trie_search(pool, ids_off, ptr_off, size1, scratch[:n], 0, n - 1, False)


@njit(**NJ)
def _locate_batch(pool, ids_off, ptr_off, size1, k, paths, lens):
    q = paths.shape[0]
    out = np.empty(q, np.int64)
    scratch = np.empty(paths.shape[1], np.int64)
    for r in range(q):
        n = lens[r]
        if n == 0:
            out[r] = -1
            continue
        out[r] = trie_locate(pool, ids_off, ptr_off, size1, k, paths[r, :n], scratch)
    return out


@njit(**NJ)
def count_index(pool, kind, off, pos):
    if kind == CW:
        return cw_access(pool, off, pos)
    hi = seq_access(pool, off, pos)
    lo = 0
    if pos > 0:
        lo = seq_access(pool, off, pos - 1)
    return hi - lo


@njit(**NJ)
def value_index(pool, off, pos):
    if off < 0:
        return pos
    return packed_access(pool, off, pos)


@njit(**NJ)
def raw_walk(labels, lab_off, ptrs, ptr_off, path, lo, hi):
    """Position of path[lo..hi] on uncompressed levels (labels sorted per range)."""
    p = path[lo]
    if p < 0 or p >= lab_off[1] - lab_off[0]:
        return -1, 0
    b = 0
    for s in range(1, hi - lo + 1):
        b = ptrs[ptr_off[s - 1] + p]
        e = ptrs[ptr_off[s - 1] + p + 1]
        x = path[lo + s]
        base = lab_off[s]
        a = b
        z = e
        while a < z:
            mid = (a + z) >> 1
            if labels[base + mid] < x:
                a = mid + 1
            else:
                z = mid
        if a >= e or labels[base + a] != x:
            return -1, 0
        p = a
    return p, b


@njit(**NJ)
def _remap_level(paths, labels, lab_off, ptrs, ptr_off, k):
    m, n = paths.shape
    out = np.empty(m, np.int64)
    for i in range(m):
        p, b = raw_walk(labels, lab_off, ptrs, ptr_off, paths[i], n - 1 - k, n - 1)
        if p < 0:
            return out, i
        out[i] = p - b
    return out, -1


@njit(**NJ)
def _prefix_sum_ranges(labels, parents):
    m = labels.shape[0]
    out = np.empty(m, np.int64)
    base = 0
    for i in range(m):
        if i > 0 and parents[i] != parents[i - 1]:
            base = out[i - 1]
        out[i] = labels[i] + base
    return out


@njit(**NJ)
def _parents_of(prev, cur):
    """Parent index of every row of ``cur`` in ``prev``; (-1, bad row) on error.

    ``prev`` rows are sorted and distinct.  Errors: -2 unsorted/duplicate,
    -3 missing parent.
    """
    m, n = cur.shape
    out = np.empty(m, np.int64)
    j = 0
    for i in range(m):
        if i > 0:
            c = 0
            for t in range(n):
                if cur[i - 1, t] != cur[i, t]:
                    c = -1 if cur[i - 1, t] < cur[i, t] else 1
                    break
            if c >= 0:
                return out, -2, i
        while j < prev.shape[0]:
            c = 0
            for t in range(n - 1):
                if prev[j, t] != cur[i, t]:
                    c = -1 if prev[j, t] < cur[i, t] else 1
                    break
            if c < 0:
                j += 1
            elif c == 0:
                break
            else:
                return out, -3, i
        if j >= prev.shape[0]:
            return out, -3, i
        out[i] = j
    return out, 0, -1


def _pointers(parents: np.ndarray, size_prev: int) -> np.ndarray:
    ptr = np.zeros(size_prev + 1, np.int64)
    np.cumsum(np.bincount(parents, minlength=size_prev), out=ptr[1:])
    return ptr


def paths_of_level(labels: list, parents: list, n: int) -> np.ndarray:
    """Full path matrix of level ``n`` (1-based) from labels and parent links."""
    m = len(labels[n - 1])
    out = np.empty((m, n), np.int64)
    out[:, n - 1] = labels[n - 1]
    anc = np.arange(m)
    for j in range(n - 1, 0, -1):
        anc = parents[j][anc]
        out[:, j - 1] = labels[j - 1][anc]
    return out


# ---------------------------------------------------------------- the index


@dataclass
class LevelSizes:
    ids_bits: int
    pointer_bits: int
    value_bits: int


class TrieIndex:
    """N-gram trie with Elias-Fano levels; see module docstring."""

    def __init__(self):
        self.N = 0
        self.k = 0
        self.direction = FORWARD
        self.payload = COUNTS
        self.q = 0
        self.vocab: Vocabulary | None = None
        self.pool = np.zeros(0, np.uint64)
        self.sizes = np.zeros(0, np.int64)
        self.ids_off = np.zeros(0, np.int64)
        self.ptr_off = np.zeros(0, np.int64)
        self.val_off = np.zeros(0, np.int64)
        self.count_kind = CW
        self.unique_counts: list[np.ndarray] = []
        self.bo_off = np.zeros(0, np.int64)
        self.prob_books: list[np.ndarray] = []
        self.bo_books: list[np.ndarray] = []
        self.block_sizes = (64, 128)

    # ------------------------------------------------------------ building

    @classmethod
    def build(cls, grams, payloads, vocab: Vocabulary, *, remap: int = 0,
              direction: str | int = "forward", payload: str | int = "counts",
              quant_bits: int | None = 8, count_encoding: str = "cw",
              block_sizes: tuple[int, int] = (64, 128)) -> "TrieIndex":
        """Build from per-order id matrices.

        ``grams[n-1]`` is an ``(m_n, n)`` matrix of token ids in natural
        left-to-right order, sorted by path (forward: as is; reversed: by
        ``(w_n, ..., w_1)``).  ``payloads[n-1]`` is the count vector, or an
        ``(m_n, 2)`` array of (probability, backoff) for prob payloads.
        """
        direction = _enum(direction, {"forward": FORWARD, "reversed": REVERSED})
        payload = _enum(payload, {"counts": COUNTS, "prob": PROBS, "prob-backoff": PROBS})
        N = len(grams)
        if N < 1:
            raise BuildError("need at least one order")
        V = vocab.V
        labels, parents, vals = [], [], []
        prev_paths = None
        for n in range(1, N + 1):
            g = np.asarray(grams[n - 1], dtype=np.int64).reshape(-1, n)
            pay = np.asarray(payloads[n - 1])
            if len(g) != len(pay):
                raise BuildError(f"order {n}: {len(g)} grams but {len(pay)} payloads")
            bad = np.nonzero((g < 0) | (g >= V))[0]
            if len(bad):
                raise BuildError(f"order {n}: gram {_fmt(g[bad[0]], vocab)} has an id outside [0, {V})")
            paths = g[:, ::-1] if direction == REVERSED else g
            paths = np.ascontiguousarray(paths)
            if n == 1:
                ids = paths[:, 0]
                if len(ids) > 1 and np.any(ids[1:] <= ids[:-1]):
                    i = int(np.nonzero(ids[1:] <= ids[:-1])[0][0]) + 1
                    raise BuildError(f"order 1: gram {_fmt(g[i], vocab)} is unsorted or duplicated")
                full = np.zeros((V,) + pay.shape[1:], dtype=np.float64 if payload == PROBS else np.int64)
                if payload == PROBS and full.ndim == 2:
                    full[:, 1] = 1.0
                full[ids] = pay
                labels.append(np.arange(V, dtype=np.int64))
                parents.append(np.zeros(0, np.int64))
                vals.append(full)
                prev_paths = np.arange(V, dtype=np.int64).reshape(-1, 1)
                continue
            par, code, row = _parents_of(prev_paths, paths)
            if code == -2:
                raise BuildError(f"order {n}: gram {_fmt(g[row], vocab)} is unsorted or duplicated")
            if code == -3:
                raise BuildError(f"order {n}: gram {_fmt(g[row], vocab)} has no stored parent context")
            labels.append(paths[:, -1].copy())
            parents.append(par)
            vals.append(pay)
            prev_paths = paths
        return cls.from_structure(vocab, labels, parents, vals, remap=remap, direction=direction,
                                  payload=payload, quant_bits=quant_bits,
                                  count_encoding=count_encoding, block_sizes=block_sizes)

    @classmethod
    def from_structure(cls, vocab, labels, parents, values, *, remap=0, direction=FORWARD,
                       payload=COUNTS, quant_bits=8, count_encoding="cw",
                       block_sizes=(64, 128)) -> "TrieIndex":
        """Build from per-level labels and parent positions.

        ``labels[0]`` must be ``arange(V)``; ``parents[n]`` (n >= 1) lists the
        level-n parent of every level-(n+1) entry, nondecreasing, with labels
        strictly increasing inside each sibling range.  ``values[n]`` holds
        counts, or (prob, backoff) columns for prob payloads.
        """
        N = len(labels)
        if not 0 <= remap <= max(0, N - 2):
            raise BuildError(f"remap order must be in [0, {max(0, N - 2)}]")
        self = cls()
        self.N, self.k, self.vocab = N, int(remap), vocab
        self.direction = direction
        self.payload = payload
        self.q = int(quant_bits) if (payload == PROBS and quant_bits) else 0
        self.block_sizes = tuple(block_sizes)
        self.count_kind = COUNT_ENCODINGS[count_encoding] if isinstance(count_encoding, str) else count_encoding
        sizes = np.array([len(l) for l in labels], np.int64)
        self.sizes = sizes
        ptrs = [_pointers(parents[n], int(sizes[n - 1])) for n in range(1, N)]

        stored_labels = [np.asarray(l, np.int64) for l in labels]
        if self.k > 0 and N > self.k + 1:
            kk = self.k
            flat_l = np.concatenate(stored_labels[:kk + 1])
            l_off = np.zeros(kk + 2, np.int64)
            np.cumsum([len(x) for x in stored_labels[:kk + 1]], out=l_off[1:])
            flat_p = np.concatenate(ptrs[:kk]) if kk else np.zeros(1, np.int64)
            p_off = np.zeros(kk + 1, np.int64)
            np.cumsum([len(x) for x in ptrs[:kk]], out=p_off[1:])
            for n in range(kk + 2, N + 1):
                paths = paths_of_level(labels, parents, n)
                new, bad = _remap_level(paths, flat_l, l_off, flat_p, p_off, kk)
                if bad >= 0:
                    tail = paths[bad][n - 1 - kk:]
                    raise BuildError(f"remapping: sub-path {_fmt(tail, vocab)} of level-{n} entry is not stored")
                stored_labels[n - 1] = new

        blobs: list[np.ndarray] = []
        cursor = [0]

        def put(obj) -> int:
            off = cursor[0]
            blobs.append(obj.blob)
            cursor[0] += len(obj.blob)
            return off

        self.ids_off = np.full(N + 1, -1, np.int64)
        self.ptr_off = np.full(N + 1, -1, np.int64)
        for n in range(2, N + 1):
            st = _prefix_sum_ranges(stored_labels[n - 1], np.asarray(parents[n - 1], np.int64))
            u = int(st[-1]) + 1 if len(st) else 0
            bs = block_sizes[0] if n == 2 else block_sizes[1]
            self.ids_off[n] = put(pef_build(st, u, bs))
        for n in range(1, N):
            p = ptrs[n - 1]
            self.ptr_off[n] = put(ef_build(p, int(p[-1]) + 1))

        self.val_off = np.full(N + 1, -1, np.int64)
        self.bo_off = np.full(N + 1, -1, np.int64)
        self.unique_counts = [np.zeros(0, np.uint64)]
        self.prob_books = [np.zeros(0, np.float32)]
        self.bo_books = [np.zeros(0, np.float32)]
        for n in range(1, N + 1):
            v = np.asarray(values[n - 1])
            if payload == COUNTS:
                uniq, idx = unique_by_frequency(v.astype(np.int64))
                self.unique_counts.append(uniq.astype(np.uint64))
                if self.count_kind == CW:
                    self.val_off[n] = put(cwarray_build(idx))
                else:
                    ps = np.cumsum(idx)
                    u = int(ps[-1]) + 1 if len(ps) else 0
                    enc = ef_build(ps, u) if self.count_kind == PS_EF else pef_build(ps, u, block_sizes[1])
                    self.val_off[n] = put(enc)
            else:
                v = v.reshape(len(v), -1)
                pr = v[:, 0]
                bo = v[:, 1] if (v.shape[1] > 1 and n < N) else None
                book, off = self._quantize(pr, n, put)
                self.prob_books.append(book)
                self.val_off[n] = off
                if bo is not None:
                    book, off = self._quantize(bo, n, put)
                    self.bo_books.append(book)
                    self.bo_off[n] = off
                else:
                    self.bo_books.append(np.zeros(0, np.float32))
        self.pool = np.concatenate(blobs) if blobs else np.zeros(HEADER, np.uint64)
        self._finish()
        return self

    def _quantize(self, vals, n, put):
        if n == 1 or not self.q or len(vals) == 0:
            return vals.astype(np.float32), -1
        quant, idx = quantize_binning(vals, self.q)
        width = max(1, (len(quant.codebook) - 1).bit_length())
        return quant.codebook, put(PackedArray.build(idx, width))

    def _finish(self) -> None:
        """Derived lookup tables (log10 codebooks, flat offsets)."""
        if self.payload == PROBS:
            self.plog = [np.log10(b.astype(np.float64)) if len(b) else b.astype(np.float64)
                         for b in self.prob_books]
            self.blog = [np.log10(b.astype(np.float64)) if len(b) else b.astype(np.float64)
                         for b in self.bo_books]
            self.plog_flat, self.plog_off = _flatten(self.plog)
            self.blog_flat, self.blog_off = _flatten(self.blog)

    # ------------------------------------------------------------- lookups

    def _paths(self, ids: np.ndarray, lens: np.ndarray) -> np.ndarray:
        if self.direction == REVERSED:
            out = np.full_like(ids, -1)
            for n in np.unique(lens):
                rows = lens == n
                out[rows, :n] = ids[rows, :n][:, ::-1]
            return out
        return ids

    def locate_ids(self, ids, lens=None) -> np.ndarray:
        """Level positions for a batch of id rows (natural order); -1 if absent."""
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        if lens is None:
            lens = np.full(len(ids), ids.shape[1], np.int64)
        lens = np.asarray(lens, np.int64)
        if ids.shape[1] > self.N or (len(lens) and lens.max() > self.N):
            raise ValueError(f"gram longer than the index order {self.N}")
        paths = np.ascontiguousarray(self._paths(ids, lens))
        return _locate_batch(self.pool, self.ids_off, self.ptr_off, int(self.sizes[0]), self.k,
                             paths, lens)

    def encode(self, grams) -> tuple[np.ndarray, np.ndarray]:
        """Token strings (or token lists) to a padded id matrix plus lengths."""
        toks = [g.split() if isinstance(g, str) else list(g) for g in grams]
        lens = np.array([len(t) for t in toks], np.int64)
        width = max(1, int(lens.max()) if len(lens) else 1)
        flat = [t for tt in toks for t in tt]
        ids = self.vocab.lookup_many(flat) if flat else np.zeros(0, np.int64)
        out = np.full((len(toks), width), -1, np.int64)
        p = 0
        for r, n in enumerate(lens):
            out[r, :n] = ids[p:p + n]
            p += n
        return out, lens

    def payload_at(self, n: int, pos: int):
        """Payload of the entry at ``pos`` on level ``n``."""
        if self.payload == COUNTS:
            idx = count_index(self.pool, self.count_kind, int(self.val_off[n]), int(pos))
            c = int(self.unique_counts[n][idx])
            return c if c > 0 else None
        pi = value_index(self.pool, int(self.val_off[n]), int(pos))
        p = float(self.prob_books[n][pi])
        b = None
        if n < self.N and len(self.bo_books[n]):
            b = float(self.bo_books[n][value_index(self.pool, int(self.bo_off[n]), int(pos))])
        return p, b

    def lookup_many(self, grams) -> list:
        ids, lens = self.encode(grams)
        pos = self.locate_ids(ids, lens)
        out = []
        for n, p in zip(lens, pos):
            out.append(None if p < 0 else self.payload_at(int(n), int(p)))
        return out

    def lookup(self, gram):
        """Payload for one gram (string or token list), None if not stored."""
        return self.lookup_many([gram])[0]

    def find_path(self, path):
        """Level position of a path given in storage order, None if absent."""
        path = np.asarray(path, np.int64)
        if not 1 <= len(path) <= self.N:
            return None
        p = trie_locate(self.pool, self.ids_off, self.ptr_off, int(self.sizes[0]), self.k,
                        path, np.empty(len(path), np.int64))
        return None if p < 0 else int(p)

    def plog_at(self, n: int, pos: int) -> float:
        return float(self.plog[n][value_index(self.pool, int(self.val_off[n]), int(pos))])

    def blog_at(self, n: int, pos: int) -> float:
        if n >= self.N or not len(self.blog[n]):
            return 0.0
        return float(self.blog[n][value_index(self.pool, int(self.bo_off[n]), int(pos))])

    def lookup_counts_ids(self, ids, lens=None) -> np.ndarray:
        """Vectorized count lookup on id rows; 0 where absent."""
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        if lens is None:
            lens = np.full(len(ids), ids.shape[1], np.int64)
        pos = self.locate_ids(ids, lens)
        return _counts_batch(self.pool, self.count_kind, self.val_off, _flatten(self.unique_counts)[0],
                             _flatten(self.unique_counts)[1], np.asarray(lens, np.int64), pos)

    # --------------------------------------------------------- inspection

    def level_ids(self, n: int) -> np.ndarray:
        return load_blob(self._blob(self.ids_off[n])).to_numpy()

    def level_pointers(self, n: int) -> np.ndarray:
        return load_blob(self._blob(self.ptr_off[n])).to_numpy()

    def _blob(self, off) -> np.ndarray:
        off = int(off)
        if off < 0:
            raise KeyError("sequence not present on this level")
        ends = sorted(int(x) for x in np.concatenate([self.ids_off, self.ptr_off, self.val_off,
                                                      self.bo_off]) if x > off)
        end = ends[0] if ends else len(self.pool)
        return self.pool[off:end]

    def level_bits(self) -> list[LevelSizes]:
        out = []
        for n in range(1, self.N + 1):
            ib = load_blob(self._blob(self.ids_off[n])).payload_bits() if self.ids_off[n] >= 0 else 0
            pb = load_blob(self._blob(self.ptr_off[n])).payload_bits() if self.ptr_off[n] >= 0 else 0
            vb = 0
            for off in (self.val_off[n], self.bo_off[n]):
                if off >= 0:
                    vb += load_blob(self._blob(off)).payload_bits()
            if self.payload == PROBS:
                vb += 32 * (len(self.prob_books[n]) + len(self.bo_books[n]))
            else:
                vb += 64 * len(self.unique_counts[n])
            out.append(LevelSizes(ib, pb, vb))
        return out

    def total_id_bits(self) -> int:
        return sum(l.ids_bits for l in self.level_bits())

    def num_grams(self) -> int:
        return int(self.sizes.sum())

    def size_bytes(self) -> int:
        return len(self.serialize())

    # ------------------------------------------------------- serialization

    def serialize(self) -> bytes:
        out = io.BytesIO()
        out.write(MAGIC + struct.pack("<HBBBBBB", VERSION, self.N, self.k, self.direction,
                                      self.payload, self.q, self.count_kind))
        vb = self.vocab.serialize()
        out.write(struct.pack("<Q", len(vb)))
        out.write(vb)
        arrays = [self.pool, self.sizes, self.ids_off, self.ptr_off, self.val_off, self.bo_off,
                  np.array(self.block_sizes, np.int64)]
        if self.payload == COUNTS:
            arrays += list(self.unique_counts)
        else:
            arrays += list(self.prob_books) + list(self.bo_books)
        out.write(struct.pack("<I", len(arrays)))
        for a in arrays:
            _write_array(out, a)
        return out.getvalue()

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.serialize())

    @classmethod
    def deserialize(cls, data: bytes) -> "TrieIndex":
        if data[:4] != MAGIC:
            raise BuildError("not a trie index file")
        _, N, k, d, pk, q, ck = struct.unpack_from("<HBBBBBB", data, 4)
        (nv,) = struct.unpack_from("<Q", data, 12)
        vocab, _ = Vocabulary.deserialize(data, 20)
        p = 20 + nv
        (na,) = struct.unpack_from("<I", data, p)
        p += 4
        arrays = []
        for _ in range(na):
            a, p = _read_array(data, p)
            arrays.append(a)
        self = cls()
        self.N, self.k, self.direction, self.payload, self.q, self.count_kind = N, k, d, pk, q, ck
        self.vocab = vocab
        (self.pool, self.sizes, self.ids_off, self.ptr_off, self.val_off, self.bo_off, bs) = arrays[:7]
        self.block_sizes = tuple(int(x) for x in bs)
        rest = arrays[7:]
        if pk == COUNTS:
            self.unique_counts = rest
        else:
            self.prob_books = rest[:N + 1]
            self.bo_books = rest[N + 1:]
        self._finish()
        return self

    @classmethod
    def load(cls, path: str) -> "TrieIndex":
        with open(path, "rb") as fh:
            return cls.deserialize(fh.read())


@njit(**NJ)
def _counts_batch(pool, kind, val_off, flat, flat_off, lens, pos):
    out = np.zeros(pos.shape[0], np.uint64)
    for r in range(pos.shape[0]):
        if pos[r] >= 0:
            n = lens[r]
            out[r] = flat[flat_off[n] + count_index(pool, kind, val_off[n], pos[r])]
    return out


def _flatten(arrs) -> tuple[np.ndarray, np.ndarray]:
    off = np.zeros(len(arrs) + 1, np.int64)
    np.cumsum([len(a) for a in arrs], out=off[1:])
    flat = np.concatenate(arrs) if len(arrs) else np.zeros(0)
    return flat, off


def _enum(v, names: dict) -> int:
    return names[v] if isinstance(v, str) else int(v)


def _fmt(ids, vocab) -> str:
    toks = []
    for i in np.asarray(ids).ravel():
        i = int(i)
        toks.append(vocab.token(i) if vocab is not None and 0 <= i < vocab.V else f"#{i}")
    return "'" + " ".join(toks) + "'"


_DT = {0: np.uint64, 1: np.int64, 2: np.float32, 3: np.float64, 4: np.uint32, 5: np.uint8,
       6: np.uint16}
_DT_CODE = {np.dtype(v): k for k, v in _DT.items()}


def _write_array(out, a: np.ndarray) -> None:
    a = np.ascontiguousarray(a)
    code = _DT_CODE[a.dtype]
    out.write(struct.pack("<BQ", code, len(a)))
    out.write(a.astype(a.dtype.newbyteorder("<")).tobytes())


def _read_array(data: bytes, p: int) -> tuple[np.ndarray, int]:
    code, n = struct.unpack_from("<BQ", data, p)
    dt = np.dtype(_DT[code]).newbyteorder("<")
    p += 9
    a = np.frombuffer(data, dt, n, p).astype(_DT[code])
    return a, p + n * dt.itemsize
