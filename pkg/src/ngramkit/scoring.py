"""Backoff scoring over a reversed probability trie.

The state after a word is the path of the longest stored gram ending at it,
kept as reversed ids plus the level positions of every prefix of that path.
The next word's walk starts at its unigram and follows the state's ids, so
a sentence costs one walk per word.  Contexts in the state that the walk
could not extend contribute their backoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from ._bits import NJ
from .corpus import encode_chunk, iter_chunks
from .succinct import seq_access, seq_find
from .trie import PROBS, REVERSED, TrieIndex, trie_search, value_index
from .vocabulary import UNK


@njit(inline="always", **NJ)
def _child(pool, ids_off, ptr_off, s, p, x):
    """Position of the child labelled ``x`` of entry ``p`` on level ``s``; -1 if absent."""
    b = seq_access(pool, ptr_off[s], p)
    e = seq_access(pool, ptr_off[s], p + 1)
    if b == e or x < 0:
        return -1
    base = 0
    if b > 0:
        base = seq_access(pool, ids_off[s + 1], b - 1)
    return seq_find(pool, ids_off[s + 1], b, e, x + base)


@njit(**NJ)
def _step(pool, ids_off, ptr_off, size1, k, val_off, bo_off, plog, plog_off, blog, blog_off,
          N, w, st_ids, st_pos, st_len, out_ids, out_pos):
    """Score ``w`` after state (st_ids, st_pos, st_len); fill the new state.

    Returns (log10 p, new state length).
    """
    out_ids[0] = w
    out_pos[0] = w
    p = w
    matched = 0
    for m in range(1, st_len + 1):
        if m >= N:
            break
        out_ids[m] = st_ids[m - 1]
        x = st_ids[m - 1]
        if k > 0 and m >= k + 1:
            x = trie_search(pool, ids_off, ptr_off, size1, out_ids, m - k, m, True)
            if x < 0:
                break
        q = _child(pool, ids_off, ptr_off, m, p, x)
        if q < 0:
            break
        p = q
        matched = m
        out_pos[m] = q
    n = matched + 1
    lp = plog[plog_off[n] + value_index(pool, val_off[n], p)]
    for m in range(matched + 1, st_len + 1):
        if blog_off[m + 1] > blog_off[m]:
            lp += blog[blog_off[m] + value_index(pool, bo_off[m], st_pos[m - 1])]
    new_len = n if n < N else N - 1
    return lp, new_len


@njit(**NJ)
def _score_corpus(pool, ids_off, ptr_off, size1, k, val_off, bo_off, plog, plog_off, blog,
                  blog_off, N, ids, off, out):
    a_ids = np.empty(N + 1, np.int64)
    a_pos = np.empty(N + 1, np.int64)
    b_ids = np.empty(N + 1, np.int64)
    b_pos = np.empty(N + 1, np.int64)
    for li in range(off.shape[0] - 1):
        st_len = 0
        flip = False
        for i in range(off[li], off[li + 1]):
            if flip:
                lp, st_len = _step(pool, ids_off, ptr_off, size1, k, val_off, bo_off, plog,
                                   plog_off, blog, blog_off, N, ids[i], b_ids, b_pos, st_len,
                                   a_ids, a_pos)
            else:
                lp, st_len = _step(pool, ids_off, ptr_off, size1, k, val_off, bo_off, plog,
                                   plog_off, blog, blog_off, N, ids[i], a_ids, a_pos, st_len,
                                   b_ids, b_pos)
            # the written state is the source of the next step
            flip = not flip
            out[i] = lp


def _check(index: TrieIndex) -> None:
    if index.payload != PROBS or index.direction != REVERSED:
        raise ValueError("scoring needs a reversed trie with probability payloads")


def _args(index: TrieIndex):
    return (index.pool, index.ids_off, index.ptr_off, int(index.sizes[0]), index.k,
            index.val_off, index.bo_off, index.plog_flat, index.plog_off, index.blog_flat,
            index.blog_off, index.N)


@dataclass
class ScorerState:
    """Reversed ids and level positions of the longest match ending at the last word."""

    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    positions: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __len__(self) -> int:
        return len(self.ids)


def word_id(index: TrieIndex, token: str) -> tuple[int, bool]:
    """(id, is_oov); OOV tokens map to unk."""
    i = index.vocab.lookup(token)
    if i is not None:
        return i, False
    unk = index.vocab.lookup(UNK)
    if unk is None:
        raise KeyError(f"'{token}' is not in the vocabulary and the model has no {UNK}")
    return unk, True


def score_word(index: TrieIndex, state: ScorerState | None, token: str) -> tuple[float, ScorerState]:
    """log10 P(token | state) and the state for the next word."""
    _check(index)
    w, _ = word_id(index, token)
    state = state or ScorerState()
    N = index.N
    st_ids = np.zeros(N + 1, np.int64)
    st_pos = np.zeros(N + 1, np.int64)
    L = len(state)
    st_ids[:L] = state.ids
    st_pos[:L] = state.positions
    out_ids = np.zeros(N + 1, np.int64)
    out_pos = np.zeros(N + 1, np.int64)
    lp, n = _step(*_args(index), w, st_ids, st_pos, L, out_ids, out_pos)
    return float(lp), ScorerState(out_ids[:n].copy(), out_pos[:n].copy())


def score_sentence(index: TrieIndex, tokens) -> np.ndarray:
    """Per-word log10 probabilities of one sentence (fresh state at its start)."""
    _check(index)
    if isinstance(tokens, str):
        tokens = tokens.split()
    ids = np.array([word_id(index, t)[0] for t in tokens], np.int64)
    out = np.empty(len(ids))
    _score_corpus(*_args(index), ids, np.array([0, len(ids)], np.int64), out)
    return out


def score_ids(index: TrieIndex, ids, off) -> np.ndarray:
    """Per-token log10 probabilities of an id corpus; ``off`` holds line boundaries."""
    _check(index)
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    out = np.empty(len(ids))
    _score_corpus(*_args(index), ids, np.ascontiguousarray(off, dtype=np.int64), out)
    return out


@dataclass
class PerplexityReport:
    perplexity: float
    words: int
    oov: int
    log10_sum: float

    def as_dict(self) -> dict:
        return {"perplexity": self.perplexity, "M": self.words, "OOV": self.oov}


def perplexity(index: TrieIndex, source, include_oov: bool = True,
               bos_eos: bool = False) -> PerplexityReport:
    """10 ** (-mean log10 P) over every word of ``source`` (path or lines).

    With ``include_oov=False`` OOV positions are left out of the mean; they
    are counted either way.
    """
    _check(index)
    unk = index.vocab.lookup(UNK)
    args = _args(index)
    total = 0.0
    M = 0
    oov = 0
    for chunk in iter_chunks(source, bos_eos=bos_eos):
        ids, off = encode_chunk(chunk, index.vocab)
        bad = ids < 0
        if np.any(bad):
            if unk is None:
                raise KeyError(f"OOV tokens and the model has no {UNK}")
            ids[bad] = unk
        is_oov = bad | (ids == unk) if unk is not None else bad
        out = np.empty(len(ids))
        _score_corpus(*args, ids, off, out)
        oov += int(is_oov.sum())
        keep = out if include_oov else out[~is_oov]
        total += math.fsum(keep)
        M += len(keep)
    if M == 0:
        raise ValueError("empty corpus")
    return PerplexityReport(10.0 ** (-total / M), M, oov, total)
