"""Modified Kneser-Ney estimation with a single external sort.

Pipeline
--------
counting
    slide an N-token window over every line, deduplicate windows in an
    open-addressing table, and flush full tables as context-sorted,
    front-coded block files.
adjusting
    merge the blocks into one context-sorted stream ``B_N`` (the only
    sorted file), and in the same scan compute left-extension statistics,
    the totals ``t[n][k]`` and the count-indexing seeds.
last
    re-scan ``B_N`` run by run.  Each maximal run sharing an order-n context
    yields the interpolated probabilities of its members and the backoff of
    its context.  Probabilities land in suffix order by count-indexing;
    context backoffs arrive in suffix order already.  A bottom-up join
    merges both into the levels of a reversed trie.

Model gram set
--------------
Let a *window* be a counted N-gram.  For n < N the model stores every
n-gram occurring inside a window.  Members that are suffixes of windows get
interpolated probabilities; the rest (contexts, and short grams near line
starts) get the value backoff would produce anyway: ``b(g[:-1]) * p(g[1:])``.
Backoffs are 1 for grams that never act as a context.  This keeps the trie
closed under both prefixes and suffixes, which lookup, remapping and
stateful scoring rely on.
"""

from __future__ import annotations

import math
import os
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._bits import NJ, mix64
from .blocks import (
    CONTEXT,
    BlockFile,
    BlockWriter,
    IOCounter,
    merge_blocks,
    radix_sort_context,
)
from .corpus import build_vocabulary, encode_chunk, iter_chunks
from .errors import DegenerateStatisticsError
from .trie import PROBS, REVERSED, TrieIndex, paths_of_level, raw_walk
from .vocabulary import Vocabulary

LOAD_FACTOR = 0.75


@dataclass
class EstimationConfig:
    order: int = 5
    ram_budget: int = 1 << 30
    tmp_dir: str | None = None
    threads: int = 1
    quant_bits: int | None = 8
    remap: int = 0
    fc: str = "byte"
    window_bytes: int = 64 << 20
    bos_eos: bool = False
    block_sizes: tuple = (64, 128)
    keep_tmp: bool = False
    discount_fallback: tuple | None = None


# ============================================================ counting pass


def record_cost(N: int) -> int:
    """Bytes of counting memory per distinct window (two buffers plus table)."""
    return 2 * (4 * N + 8) + 8


@njit(inline="always", **NJ)
def _hash_window(ids, s, N):
    h = np.uint64(0x9E3779B97F4A7C15)
    for t in range(N):
        h = mix64(h ^ np.uint64(ids[s + t] + 1))
    return h


@njit(**NJ)
def _count_windows(ids, off, li, p, N, table, bw, bc, nrec, cap):
    """Insert windows from line ``li``, offset ``p``; stop when a new window does not fit."""
    mask = np.uint64(table.shape[0] - 1)
    nlines = off.shape[0] - 1
    while li < nlines:
        s = off[li]
        L = off[li + 1] - s
        while p + N <= L:
            slot = _hash_window(ids, s + p, N) & mask
            while True:
                r = table[slot]
                if r < 0:
                    if nrec >= cap:
                        return li, p, nrec
                    table[slot] = nrec
                    for t in range(N):
                        bw[nrec, t] = ids[s + p + t]
                    bc[nrec] = 1
                    nrec += 1
                    break
                same = True
                for t in range(N):
                    if bw[r, t] != ids[s + p + t]:
                        same = False
                        break
                if same:
                    bc[r] += 1
                    break
                slot = (slot + np.uint64(1)) & mask
            p += 1
        li += 1
        p = 0
    return li, p, nrec


@dataclass
class CountingResult:
    files: list
    vocab: Vocabulary
    tokens: int
    windows: int
    heads: np.ndarray
    io: IOCounter


def counting_pass(source, N: int, ram_budget: int = 1 << 30, tmp_dir: str | None = None,
                  vocab: Vocabulary | None = None, fc: str = "byte",
                  window_bytes: int = 64 << 20, io_counter: IOCounter | None = None,
                  bos_eos: bool = False, threads: int = 1) -> CountingResult:
    """Count windows into context-sorted block files.

    A scan thread fills one buffer while a writer thread sorts and flushes the
    other.  Returns the files plus the vocabulary and line-head grams (first
    N-2 tokens of every line holding at least one window).
    """
    if vocab is None:
        vocab = build_vocabulary(source, bos_eos)
    if tmp_dir is None:
        tmp_dir = tempfile.mkdtemp(prefix="ngramkit-")
    io_counter = io_counter if io_counter is not None else IOCounter()
    cap = max(1, int(ram_budget) // record_cost(N))
    tsize = 1 << max(4, int(math.ceil(math.log2(cap / LOAD_FACTOR + 1))))
    table = np.full(tsize, -1, np.int32)
    bufs = [(np.zeros((cap, N), np.uint32), np.zeros(cap, np.uint64)) for _ in range(2)]
    cur = 0
    nrec = 0
    files: list[str] = []
    pending = None
    tokens = windows = 0
    heads: list[np.ndarray] = []
    V = vocab.V

    def flush(w, c, path):
        sw, sc = radix_sort_context(w, c, workers=threads, V=V)
        with BlockWriter(path, N, fc, window_bytes, CONTEXT, io_counter, "counting") as wr:
            wr.write(sw, sc)
        return path

    nflush = [0]
    with ThreadPoolExecutor(max_workers=1) as pool:
        def submit():
            nonlocal pending, cur, nrec
            if pending is not None:
                files.append(pending.result())
            path = os.path.join(tmp_dir, f"count-{nflush[0]:05d}.ngbk")
            nflush[0] += 1
            w, c = bufs[cur]
            pending = pool.submit(flush, w[:nrec], c[:nrec], path)
            # the other buffer is free once its earlier flush (if any) is done
            cur ^= 1
            nrec = 0
            table.fill(-1)

        for chunk in iter_chunks(source, bos_eos=bos_eos):
            ids, off = encode_chunk(chunk, vocab)
            tokens += len(ids)
            lens = np.diff(off)
            windows += int(np.maximum(lens - N + 1, 0).sum())
            if N >= 4:
                full = np.nonzero(lens >= N)[0]
                if len(full):
                    heads.append(ids[off[full][:, None] + np.arange(N - 2)])
            li, p = 0, 0
            while True:
                w, c = bufs[cur]
                li, p, nrec = _count_windows(ids, off, li, p, N, table, w, c, nrec, cap)
                if li >= len(off) - 1:
                    break
                submit()
        if nrec:
            submit()
        if pending is not None:
            files.append(pending.result())
    files = sorted(set(files))
    hd = np.unique(np.concatenate(heads), axis=0) if heads else np.zeros((0, max(N - 2, 0)), np.int64)
    return CountingResult([BlockFile(f) for f in files], vocab, tokens, windows, hd, io_counter)


# ============================================================ statistics


@dataclass
class SmoothingStats:
    """t[n][k] totals (k = 1..4) and per-run deltas R[n][k] (k = 1..5)."""

    N: int
    T: np.ndarray = None
    R: np.ndarray = None

    def __post_init__(self):
        if self.T is None:
            self.T = np.zeros((self.N + 1, 5), np.int64)
        if self.R is None:
            self.R = np.zeros((self.N + 1, 6), np.int64)

    def t(self, n: int, k: int) -> int:
        return int(self.T[n, k])

    def fold(self, n: int) -> None:
        self.T[n, 1:5] += self.R[n, 1:5]
        self.R[n] = 0


class StatisticsTable:
    """Per-order direct-address (left, count, range) entries with lazy reset."""

    def __init__(self, N: int, V: int):
        self.N, self.V = N, V
        self.left = np.full((N + 1, V), -1, np.int64)
        self.count = np.zeros((N + 1, V), np.int64)
        self.range = np.full((N + 1, V), -1, np.int64)
        self.ranges = np.zeros(N + 1, np.int64)

    def update(self, n: int, left: int, right: int, smoothing: SmoothingStats) -> bool:
        """Record ``left`` as a left extension of the order-n gram ending in ``right``.

        Returns True when the entry starts a new gram in the current run.
        """
        new = False
        if n > 1 and self.range[n, right] != self.ranges[n]:
            self.range[n, right] = self.ranges[n]
            self.count[n, right] = 0
            self.left[n, right] = -1
        if self.left[n, right] != left:
            new = self.count[n, right] == 0
            self.left[n, right] = left
            self.count[n, right] += 1
            k = int(self.count[n, right])
            if k == 1:
                smoothing.R[n, 1] += 1
            elif k <= 5:
                smoothing.R[n, k] += 1
                smoothing.R[n, k - 1] -= 1
        return new

    def a(self, n: int, w: int) -> int:
        return int(self.count[n, w])


def stats_update(n, left, right, stats: StatisticsTable, smoothing: SmoothingStats) -> bool:
    return stats.update(n, left, right, smoothing)


@dataclass
class Discounts:
    D: np.ndarray  # (N + 1, 4); D[n][0] = 0

    def __call__(self, n: int, k: int) -> float:
        return float(self.D[n, min(k, 3)])


def discounts_from_t(t1, t2, t3, t4, n: int = 1) -> np.ndarray:
    t = [None, t1, t2, t3, t4]
    out = np.zeros(4)
    if t1 <= 0:
        raise DegenerateStatisticsError(n, 1, "t1 = 0")
    for k in (1, 2, 3):
        den = (t1 + 2 * t2) * t[k]
        if den == 0:
            raise DegenerateStatisticsError(n, k, "zero denominator")
        d = k - (k + 1) * t1 * t[k + 1] / den
        if not 0 <= d <= k:
            raise DegenerateStatisticsError(n, k, f"D = {d} outside [0, {k}]")
        out[k] = d
    return out


FALLBACK_DISCOUNTS = (0.5, 1.0, 1.5)


def compute_discounts(smoothing: SmoothingStats, fallback=None) -> Discounts:
    """Closed-form discounts per order.

    With ``fallback`` (a D(1), D(2), D(3) triple) degenerate orders take the
    fallback instead of raising.
    """
    D = np.zeros((smoothing.N + 1, 4))
    for n in range(1, smoothing.N + 1):
        try:
            D[n] = discounts_from_t(*(int(x) for x in smoothing.T[n, 1:5]), n=n)
        except DegenerateStatisticsError:
            if fallback is None:
                raise
            D[n, 1:] = fallback
    return Discounts(D)


@dataclass
class ModelConstants:
    V: int
    m2: int
    b_eps: float

    @property
    def unk_prob(self) -> float:
        return self.b_eps / self.V

    @property
    def unk_log_prob(self) -> float:
        return math.log10(self.unk_prob) if self.unk_prob > 0 else -math.inf


class PositionsTable:
    """Count-indexing cursors: exclusive prefix sums of last-word counts."""

    def __init__(self, counts: np.ndarray):
        self.counts = np.asarray(counts, np.int64)
        self.positions = np.zeros_like(self.counts)
        self.positions[..., 1:] = np.cumsum(self.counts, axis=-1)[..., :-1]

    def place(self, n: int, w: int) -> int:
        p = int(self.positions[n, w])
        self.positions[n, w] += 1
        return p


# ============================================================ adjusting pass


@njit(**NJ)
def _left_extensions(words, counts, N, st_left, st_count, st_range, ranges, R, T,
                     cnt_last, runs, ucount, prev, has_prev):
    m = words.shape[0]
    for i in range(m):
        d = -1
        if has_prev[0]:
            d = 0
            while d < N - 1 and words[i, N - 2 - d] == prev[N - 2 - d]:
                d += 1
        for n in range(2, N + 1):
            if d < n - 1:
                if n < N:
                    for k in range(1, 5):
                        T[n, k] += R[n, k]
                    for k in range(6):
                        R[n, k] = 0
                    ranges[n] += 1
                runs[n] += 1
        right = np.int64(words[i, N - 1])
        for n in range(1, N):
            left = np.int64(words[i, N - n - 1])
            if n > 1 and st_range[n, right] != ranges[n]:
                st_range[n, right] = ranges[n]
                st_count[n, right] = 0
                st_left[n, right] = -1
            if st_left[n, right] != left:
                if st_count[n, right] == 0:
                    cnt_last[n, right] += 1
                st_left[n, right] = left
                st_count[n, right] += 1
                k = st_count[n, right]
                if k == 1:
                    R[n, 1] += 1
                elif k <= 5:
                    R[n, k] += 1
                    R[n, k - 1] -= 1
        c = counts[i]
        if c <= 4:
            T[N, c] += 1
        cnt_last[N, right] += 1
        if N == 1:
            ucount[right] += c
        for t in range(N):
            prev[t] = words[i, t]
        has_prev[0] = 1


class AdjustState:
    """Carried state of the left-extension scan across chunks."""

    def __init__(self, N: int, V: int):
        self.N, self.V = N, V
        self.stats = StatisticsTable(N, V)
        self.smoothing = SmoothingStats(N)
        self.cnt_last = np.zeros((N + 1, V), np.int64)
        self.runs = np.zeros(N + 1, np.int64)
        self.ucount = np.zeros(V, np.int64)
        self.prev = np.zeros(N, np.int64)
        self.has_prev = np.zeros(1, np.int64)
        self.records = 0

    def finish(self) -> None:
        for n in range(1, self.N):
            self.smoothing.fold(n)

    @property
    def a1(self) -> np.ndarray:
        if self.N == 1:
            return self.ucount
        return self.stats.count[1]


def compute_left_extensions(words, counts, state: AdjustState) -> None:
    """Stream one context-sorted chunk through the left-extension scan."""
    st = state.stats
    sm = state.smoothing
    _left_extensions(np.ascontiguousarray(words), np.ascontiguousarray(counts, dtype=np.uint64),
                     state.N, st.left, st.count, st.range, st.ranges, sm.R, sm.T,
                     state.cnt_last, state.runs, state.ucount, state.prev, state.has_prev)
    state.records += len(words)


@dataclass
class AdjustingResult:
    bn: BlockFile
    state: AdjustState
    discounts: Discounts | None
    constants: ModelConstants | None
    merges: int

    @property
    def smoothing(self) -> SmoothingStats:
        return self.state.smoothing


def _constants(state: AdjustState, disc: Discounts, V: int) -> ModelConstants:
    a1 = state.a1
    m2 = int(a1.sum())
    D1 = disc.D[1]
    n1 = int(np.sum(a1 == 1))
    n2 = int(np.sum(a1 == 2))
    n3 = int(np.sum(a1 >= 3))
    b_eps = (D1[1] * n1 + D1[2] * n2 + D1[3] * n3) / m2
    return ModelConstants(V, m2, b_eps)


def adjusting_pass(files, N: int, V: int, tmp_dir: str, fc: str = "byte",
                   window_bytes: int = 64 << 20, io_counter: IOCounter | None = None,
                   with_discounts: bool = True, discount_fallback=None) -> AdjustingResult:
    """Merge counting blocks into B_N while scanning left extensions."""
    io_counter = io_counter if io_counter is not None else IOCounter()
    state = AdjustState(N, V)
    path = os.path.join(tmp_dir, "B_N.ngbk")
    with BlockWriter(path, N, fc, window_bytes, CONTEXT, io_counter, "B_N") as wr:
        for w, c in merge_blocks(files, CONTEXT, True, tmp_dir, io_counter, fc):
            compute_left_extensions(w, c, state)
            wr.write(w, c)
    state.finish()
    disc = consts = None
    if with_discounts:
        disc = compute_discounts(state.smoothing, discount_fallback)
        consts = _constants(state, disc, V)
    return AdjustingResult(BlockFile(path), state, disc, consts, 1)


def unigram_prob(w: int, a: int, discounts: Discounts, constants: ModelConstants) -> float:
    u = (a - discounts(1, a)) / constants.m2 if a > 0 else 0.0
    return u + constants.b_eps / constants.V


def unigram_probs(a1: np.ndarray, disc: Discounts, consts: ModelConstants) -> np.ndarray:
    a = a1.astype(np.int64)
    D = disc.D[1][np.minimum(a, 3)]
    return (a - D) / consts.m2 + consts.b_eps / consts.V


# ================================================================ last pass


@njit(**NJ)
def _shared_ctx(words, i, j, N, upto):
    """Number of leading context-key components (w_{N-1}, w_{N-2}, ...) shared."""
    d = 0
    while d < upto and words[i, N - 2 - d] == words[j, N - 2 - d]:
        d += 1
    return d


@njit(**NJ)
def _last_chunk(words, counts, lo, hi, N, D, p1, place,
                stamp, acount, lastleft, pdir, sdir, run_id, distinct,
                cnt_s, cnt_c, cur_s, cur_c,
                s_off, s_prob, s_word, s_par, s_a,
                c_off, c_bo, c_word, c_par, cw_off, c_words):
    ctx_c = np.full(N + 1, -1, np.int64)
    for i in range(lo, hi):
        d = -1
        if i > lo:
            d = _shared_ctx(words, i, i - 1, N, N - 1)
        for n in range(2, N + 1):
            if d >= n - 1:
                continue
            e = i + 1
            while e < hi and _shared_ctx(words, e, i, N, n - 1) >= n - 1:
                e += 1
            run_id[n] += 1
            rid = run_id[n]
            nd = 0
            if n < N:
                for r in range(i, e):
                    left = np.int64(words[r, N - n - 1])
                    w = np.int64(words[r, N - 1])
                    if stamp[n, w] != rid:
                        stamp[n, w] = rid
                        acount[n, w] = 0
                        lastleft[n, w] = -1
                        distinct[nd] = w
                        nd += 1
                    if lastleft[n, w] != left:
                        lastleft[n, w] = left
                        acount[n, w] += 1
            else:
                for r in range(i, e):
                    distinct[nd] = r
                    nd += 1
            dsum = 0
            n1 = 0
            n2 = 0
            n3 = 0
            for t in range(nd):
                if n < N:
                    a = acount[n, distinct[t]]
                else:
                    a = np.int64(counts[distinct[t]])
                dsum += a
                if a == 1:
                    n1 += 1
                elif a == 2:
                    n2 += 1
                else:
                    n3 += 1
            bo = (D[n, 1] * n1 + D[n, 2] * n2 + D[n, 3] * n3) / dsum
            first = np.int64(words[i, N - n])
            if place:
                ci = cur_c[n - 1]
                cur_c[n - 1] += 1
                c_bo[c_off[n - 1] + ci] = bo
                c_word[c_off[n - 1] + ci] = first
                c_par[c_off[n - 1] + ci] = ctx_c[n - 2] if n >= 3 else -1
                base = cw_off[n - 1] + ci * (n - 1)
                for t in range(n - 1):
                    c_words[base + t] = words[i, N - n + t]
                ctx_c[n - 1] = ci
            else:
                cnt_c[n - 1] += 1
            for t in range(nd):
                if n < N:
                    w = distinct[t]
                    a = acount[n, w]
                else:
                    w = np.int64(words[distinct[t], N - 1])
                    a = np.int64(counts[distinct[t]])
                if not place:
                    cnt_s[n, w] += 1
                    continue
                if n == 2:
                    pl = p1[w]
                else:
                    pl = pdir[n - 1, w]
                ka = a if a < 3 else 3
                p = (a - D[n, ka]) / dsum + bo * pl
                pos = cur_s[n, w]
                cur_s[n, w] += 1
                s_prob[s_off[n] + pos] = p
                s_word[s_off[n] + pos] = first
                s_par[s_off[n] + pos] = w if n == 2 else sdir[n - 1, w]
                s_a[s_off[n] + pos] = a
                pdir[n, w] = p
                sdir[n, w] = pos


class _Worker:
    def __init__(self, N, V, maxrun):
        self.stamp = np.full((N + 1, V), -1, np.int64)
        self.acount = np.zeros((N + 1, V), np.int64)
        self.lastleft = np.full((N + 1, V), -1, np.int64)
        self.pdir = np.zeros((N + 1, V))
        self.sdir = np.zeros((N + 1, V), np.int64)
        self.run_id = np.zeros(N + 1, np.int64)
        self.distinct = np.zeros(max(V, maxrun) + 1, np.int64)


def _order2_cuts(words: np.ndarray, N: int, parts: int) -> list[int]:
    """Split points aligned on changes of w_{N-1}."""
    m = len(words)
    if m == 0:
        return [0, 0]
    if N < 2:
        return [0, m]
    change = np.nonzero(words[1:, N - 2] != words[:-1, N - 2])[0] + 1
    cuts = [0]
    for q in range(1, parts):
        target = q * m // parts
        k = np.searchsorted(change, target)
        if k < len(change) and change[k] > cuts[-1]:
            cuts.append(int(change[k]))
    cuts.append(m)
    return sorted(set(cuts))


@dataclass
class ModelLevels:
    """Float64 model before trie encoding: per level labels, parents, p, b."""

    N: int
    vocab: Vocabulary
    labels: list
    parents: list
    prob: list
    backoff: list

    def paths(self, n: int) -> np.ndarray:
        return paths_of_level(self.labels, self.parents, n)

    def grams(self, n: int) -> np.ndarray:
        """Natural-order id matrix of level ``n`` entries."""
        return self.paths(n)[:, ::-1]

    def as_dict(self) -> dict:
        """{gram id tuple: (p, b or None)} over all levels."""
        out = {}
        for n in range(1, self.N + 1):
            g = self.grams(n)
            b = self.backoff[n - 1]
            for i, row in enumerate(map(tuple, g.tolist())):
                out[row] = (float(self.prob[n - 1][i]), None if b is None else float(b[i]))
        return out

    def num_grams(self) -> int:
        return sum(len(l) for l in self.labels)


def _flat_structure(labels, ptrs, upto):
    fl = np.concatenate([np.asarray(x, np.int64) for x in labels[:upto]])
    lo = np.zeros(upto + 1, np.int64)
    np.cumsum([len(x) for x in labels[:upto]], out=lo[1:])
    if upto > 1:
        fp = np.concatenate(ptrs[:upto - 1])
    else:
        fp = np.zeros(1, np.int64)
    po = np.zeros(upto, np.int64)
    np.cumsum([len(x) for x in ptrs[:upto - 1]], out=po[1:])
    return fl, lo, fp, po


@njit(**NJ)
def _walk_many(fl, lo, fp, po, paths):
    out = np.empty(paths.shape[0], np.int64)
    n = paths.shape[1]
    for i in range(paths.shape[0]):
        p, _b = raw_walk(fl, lo, fp, po, paths[i], 0, n - 1)
        out[i] = p
    return out


def _join(N, V, p1, b1, S, C, heads):
    """Merge count-indexed S items, streamed C items and head grams per level."""
    labels = [np.arange(V, dtype=np.int64)]
    parents = [np.zeros(0, np.int64)]
    prob = [p1]
    backoff = [b1 if N > 1 else None]
    ptrs: list = []
    s2g_prev = np.arange(V, dtype=np.int64)
    c2g_prev = C[1][1].astype(np.int64) if N > 1 else None  # C_1 item -> unigram id
    for n in range(2, N + 1):
        s_prob, s_word, s_par = S[n]
        keys_p = [s2g_prev[s_par]]
        keys_l = [s_word]
        src_words = []
        if n < N:
            c_bo, c_word, c_par, c_words = C[n]
            keys_p.append(c2g_prev[c_par])
            keys_l.append(c_word)
            src_words.append(c_words)
        if n <= N - 2 and len(heads):
            cand = np.unique(np.concatenate([heads[:, s:s + n] for s in range(heads.shape[1] - n + 1)]),
                             axis=0)
            fl, lo, fp, po = _flat_structure(labels, ptrs, n - 1)
            par = _walk_many(fl, lo, fp, po, np.ascontiguousarray(cand[:, :0:-1]))
            if np.any(par < 0):
                raise AssertionError("head gram suffix missing from lower level")
            keys_p.append(par)
            keys_l.append(cand[:, 0])
            src_words.append(cand)
        kp = np.concatenate(keys_p).astype(np.int64)
        kl = np.concatenate(keys_l).astype(np.int64)
        key = kp * V + kl
        gkey, first_idx = np.unique(key, return_index=True)
        size = len(gkey)
        g_par = gkey // V
        g_lab = gkey % V
        s2g = np.searchsorted(gkey, key[:len(s_prob)])
        p = np.full(size, np.nan)
        p[s2g] = s_prob
        b = None
        c2g = None
        if n < N:
            nS = len(s_prob)
            nC = len(C[n][0])
            c2g = np.searchsorted(gkey, key[nS:nS + nC])
            b = np.ones(size)
            b[c2g] = C[n][0]
        missing = np.nonzero(np.isnan(p))[0]
        if len(missing):
            # words of every non-suffix entry, taken from its first source row
            allw = np.concatenate(src_words) if src_words else np.zeros((0, n), np.int64)
            src = first_idx[missing] - len(s_prob)
            gw = allw[src]
            fl, lo, fp, po = _flat_structure(labels, ptrs, n - 1)
            ctx = _walk_many(fl, lo, fp, po, np.ascontiguousarray(gw[:, -2::-1]))
            bctx = np.where(ctx >= 0, backoff[n - 2][np.maximum(ctx, 0)], 1.0)
            p[missing] = bctx * prob[n - 2][g_par[missing]]
        labels.append(g_lab)
        parents.append(g_par)
        prob.append(p)
        backoff.append(b)
        pt = np.zeros(len(labels[n - 2]) + 1, np.int64)
        np.cumsum(np.bincount(g_par, minlength=len(labels[n - 2])), out=pt[1:])
        ptrs.append(pt)
        s2g_prev, c2g_prev = s2g, c2g
    return labels, parents, prob, backoff


@dataclass
class LastPassResult:
    model: ModelLevels
    S: dict
    C: dict
    positions_seed: dict
    a: dict = field(default_factory=dict)

    def modified_counts(self) -> dict:
        """{n: (grams in natural order, a-values)} for every suffix gram, n >= 2."""
        out = {}
        prev = None
        for n in sorted(self.S):
            _, word, par = self.S[n]
            tail = par.reshape(-1, 1) if n == 2 else prev[par]
            g = np.column_stack([word, tail])
            out[n] = (g, self.a[n])
            prev = g
        return out


def last_pass(bn: BlockFile, N: int, vocab: Vocabulary, adj: AdjustingResult,
              heads: np.ndarray | None = None, threads: int = 1,
              batch_records: int = 1 << 22) -> LastPassResult:
    """Stream B_N once, emitting interpolated probabilities and backoffs."""
    V = vocab.V
    state = adj.state
    D = adj.discounts.D
    p1 = unigram_probs(state.a1, adj.discounts, adj.constants)
    b1 = np.ones(V)
    if N == 1:
        model = ModelLevels(1, vocab, [np.arange(V, dtype=np.int64)], [np.zeros(0, np.int64)],
                            [p1], [None])
        return LastPassResult(model, {}, {}, {})
    nS = state.cnt_last.sum(axis=1)
    nC = np.zeros(N + 1, np.int64)
    nC[1:N] = state.runs[2:N + 1]
    s_off = np.zeros(N + 2, np.int64)
    s_off[1:] = np.cumsum(np.concatenate([[0], nS[1:N + 1]]))
    # s_off[n] = start of level n; only n >= 2 used
    s_off = np.zeros(N + 1, np.int64)
    tot = 0
    for n in range(2, N + 1):
        s_off[n] = tot
        tot += int(nS[n])
    s_prob = np.zeros(tot)
    s_word = np.zeros(tot, np.int64)
    s_par = np.zeros(tot, np.int64)
    s_a = np.zeros(tot, np.int64)
    c_off = np.zeros(N + 1, np.int64)
    cw_off = np.zeros(N + 1, np.int64)
    ctot = cwtot = 0
    for n in range(1, N):
        c_off[n] = ctot
        cw_off[n] = cwtot
        ctot += int(nC[n])
        cwtot += int(nC[n]) * n
    c_bo = np.zeros(ctot)
    c_word = np.zeros(ctot, np.int64)
    c_par = np.zeros(ctot, np.int64)
    c_words = np.zeros(cwtot, np.int64)
    seed = PositionsTable(state.cnt_last)
    positions = seed.positions.copy()
    cpos = np.zeros(N + 1, np.int64)
    K = max(1, threads - 1) if threads > 1 else 1
    maxrun = 0
    workers = None

    def run_batch(w, c):
        nonlocal workers, cpos, positions, maxrun
        cuts = _order2_cuts(w, N, K)
        parts = list(zip(cuts[:-1], cuts[1:]))
        if workers is None or len(w) + 1 > len(workers[0].distinct):
            workers = [_Worker(N, V, len(w)) for _ in range(max(K, len(parts)))]
        cnts = [(np.zeros((N + 1, V), np.int64), np.zeros(N + 1, np.int64)) for _ in parts]

        def count(j):
            lo, hi = parts[j]
            wk = workers[j]
            _last_chunk(w, c, lo, hi, N, D, p1, False, wk.stamp, wk.acount, wk.lastleft,
                        wk.pdir, wk.sdir, wk.run_id, wk.distinct, cnts[j][0], cnts[j][1],
                        positions, cpos, s_off, s_prob, s_word, s_par, s_a,
                        c_off, c_bo, c_word, c_par, cw_off, c_words)

        with ThreadPoolExecutor(max_workers=K) as ex:
            list(ex.map(count, range(len(parts))))
        starts = []
        ps, cs = positions.copy(), cpos.copy()
        for j in range(len(parts)):
            starts.append((ps.copy(), cs.copy()))
            ps += cnts[j][0]
            cs += cnts[j][1]

        def place(j):
            lo, hi = parts[j]
            wk = workers[j]
            cur_s, cur_c = starts[j]
            _last_chunk(w, c, lo, hi, N, D, p1, True, wk.stamp, wk.acount, wk.lastleft,
                        wk.pdir, wk.sdir, wk.run_id, wk.distinct, cnts[j][0], cnts[j][1],
                        cur_s, cur_c, s_off, s_prob, s_word, s_par, s_a,
                        c_off, c_bo, c_word, c_par, cw_off, c_words)

        with ThreadPoolExecutor(max_workers=K) as ex:
            list(ex.map(place, range(len(parts))))
        positions, cpos = ps, cs

    carry_w = np.zeros((0, N), np.uint32)
    carry_c = np.zeros(0, np.uint64)
    for w, c in bn.windows():
        w = np.concatenate([carry_w, w]) if len(carry_w) else w
        c = np.concatenate([carry_c, c]) if len(carry_c) else c
        if len(w) < batch_records:
            carry_w, carry_c = w, c
            continue
        change = np.nonzero(w[1:, N - 2] != w[:-1, N - 2])[0] + 1
        if not len(change):
            carry_w, carry_c = w, c
            continue
        cut = int(change[-1])
        run_batch(w[:cut], c[:cut])
        carry_w, carry_c = w[cut:], c[cut:]
    if len(carry_w):
        run_batch(carry_w, carry_c)

    # placement must fill every slot exactly
    end = seed.positions.copy()
    end[:, :-1] = seed.positions[:, 1:]
    end[:, -1] = seed.positions[:, -1] + state.cnt_last[:, -1]
    assert np.array_equal(positions[2:], end[2:]), "count-indexing cursors did not meet"

    S, C, A = {}, {}, {}
    for n in range(2, N + 1):
        sl = slice(s_off[n], s_off[n] + nS[n])
        S[n] = (s_prob[sl], s_word[sl], s_par[sl])
        A[n] = s_a[sl]
    for n in range(1, N):
        sl = slice(c_off[n], c_off[n] + nC[n])
        cw = c_words[cw_off[n]:cw_off[n] + nC[n] * n].reshape(-1, n)
        C[n] = (c_bo[sl], c_word[sl], c_par[sl], cw)
    b1[C[1][1]] = C[1][0]
    hd = heads if heads is not None else np.zeros((0, 0), np.int64)
    labels, parents, prob, backoff = _join(N, V, p1, b1, S, C, hd)
    model = ModelLevels(N, vocab, labels, parents, prob, backoff)
    return LastPassResult(model, S, C, {n: seed.positions[n].copy() for n in range(2, N + 1)}, A)


# ================================================================= driver


@dataclass
class EstimationResult:
    model: ModelLevels
    index: TrieIndex
    counting: CountingResult
    adjusting: AdjustingResult
    io: IOCounter
    timings: dict = field(default_factory=dict)
    last: LastPassResult | None = None

    @property
    def vocab(self) -> Vocabulary:
        return self.model.vocab


def build_model_index(model: ModelLevels, quant_bits=8, remap=0, block_sizes=(64, 128)) -> TrieIndex:
    values = []
    for n in range(1, model.N + 1):
        p = model.prob[n - 1]
        b = model.backoff[n - 1]
        values.append(np.column_stack([p, b]) if b is not None else p.reshape(-1, 1))
    return TrieIndex.from_structure(model.vocab, model.labels, model.parents, values,
                                    remap=remap, direction=REVERSED, payload=PROBS,
                                    quant_bits=quant_bits, block_sizes=block_sizes)


def estimate(source, config: EstimationConfig | None = None, vocab: Vocabulary | None = None,
             **overrides) -> EstimationResult:
    """Run counting, adjusting and last pass; return the model and its trie."""
    cfg = config or EstimationConfig()
    for k, v in overrides.items():
        setattr(cfg, k, v)
    N = cfg.order
    if not 1 <= N <= 8:
        raise ValueError("order must be in [1, 8]")
    own_tmp = cfg.tmp_dir is None
    base = cfg.tmp_dir or os.environ.get("NGRAM_TMPDIR") or None
    tmp = tempfile.mkdtemp(prefix="ngramkit-", dir=base)
    io_counter = IOCounter()
    timings = {}
    try:
        t0 = time.perf_counter()
        cnt = counting_pass(source, N, cfg.ram_budget, tmp, vocab, cfg.fc, cfg.window_bytes,
                            io_counter, cfg.bos_eos, cfg.threads)
        timings["counting"] = time.perf_counter() - t0
        if not cnt.files:
            raise ValueError(f"corpus holds no line with at least {N} tokens")
        t0 = time.perf_counter()
        adj = adjusting_pass(cnt.files, N, cnt.vocab.V, tmp, cfg.fc, cfg.window_bytes, io_counter,
                             discount_fallback=cfg.discount_fallback)
        timings["adjusting"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        batch = max(1024, cfg.ram_budget // record_cost(N))
        last = last_pass(adj.bn, N, cnt.vocab, adj, cnt.heads, cfg.threads, batch)
        timings["last"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        index = build_model_index(last.model, cfg.quant_bits, cfg.remap, cfg.block_sizes)
        timings["index"] = time.perf_counter() - t0
    finally:
        if not cfg.keep_tmp:
            shutil.rmtree(tmp, ignore_errors=True)
        if own_tmp:
            pass
    return EstimationResult(last.model, index, cnt, adj, io_counter, timings, last)


def _fmt_log(x: float) -> str:
    return f"{math.log10(x):.7g}" if x > 0 else "-99"


def write_arpa(model: ModelLevels, path: str) -> None:
    """Standard ARPA text: per order, log10 p, gram, optional log10 backoff."""
    vocab = model.vocab
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for n in range(1, model.N + 1):
            fh.write(f"ngram {n}={len(model.labels[n - 1])}\n")
        for n in range(1, model.N + 1):
            fh.write(f"\n\\{n}-grams:\n")
            grams = model.grams(n)
            p = model.prob[n - 1]
            b = model.backoff[n - 1]
            for i, row in enumerate(grams):
                toks = " ".join(vocab.tokens[int(t)] for t in row)
                line = f"{_fmt_log(p[i])}\t{toks}"
                if b is not None:
                    line += f"\t{_fmt_log(b[i])}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")
