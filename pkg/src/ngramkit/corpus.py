"""Text input helpers: line streams, id encoding, n-gram counting, counts files."""

from __future__ import annotations

import os
from collections import Counter
from typing import Iterable, Iterator

import numpy as np

from .blocks import combine_sorted, radix_sort_context, sort_order
from .mph import pack_keys
from .vocabulary import UNK, Vocabulary

BOS, EOS = "<s>", "</s>"


def iter_lines(source, bos_eos: bool = False) -> Iterator[bytes]:
    """Yield each line of a path or an iterable of strings as UTF-8 bytes."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        fh = open(source, "rb")
        it: Iterable = fh
    else:
        fh = None
        it = source
    try:
        for line in it:
            if isinstance(line, str):
                line = line.encode("utf-8")
            line = line.rstrip(b"\r\n")
            if bos_eos:
                line = b"<s> " + line + b" </s>"
            yield line
    finally:
        if fh is not None:
            fh.close()


def iter_chunks(source, chunk_lines: int = 65536, bos_eos: bool = False) -> Iterator[list[bytes]]:
    buf: list[bytes] = []
    for line in iter_lines(source, bos_eos):
        buf.append(line)
        if len(buf) >= chunk_lines:
            yield buf
            buf = []
    if buf:
        yield buf


def token_counts(source, bos_eos: bool = False) -> Counter:
    c: Counter = Counter()
    for chunk in iter_chunks(source, bos_eos=bos_eos):
        for line in chunk:
            c.update(line.split())
    return c


def build_vocabulary(source, bos_eos: bool = False) -> Vocabulary:
    c = token_counts(source, bos_eos)
    if not c:
        raise ValueError("empty corpus")
    return Vocabulary.build({k.decode("utf-8"): v for k, v in c.items()})


def encode_chunk(lines: list[bytes], vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    """(ids int64 concatenated, line offsets) with unknown tokens mapped to unk."""
    toks = [line.split() for line in lines]
    lens = np.fromiter((len(t) for t in toks), np.int64, len(toks))
    off = np.zeros(len(toks) + 1, np.int64)
    np.cumsum(lens, out=off[1:])
    flat = [t for tt in toks for t in tt]
    if not flat:
        return np.zeros(0, np.int64), off
    buf, offs = pack_keys(flat)
    ids = vocab.lookup_packed(buf, offs)
    if np.any(ids < 0):
        unk = vocab.lookup(UNK)
        ids[ids < 0] = -1 if unk is None else unk
    return ids, off


def window_starts(off: np.ndarray, n: int) -> np.ndarray:
    """Start positions of every n-token window that stays inside a line."""
    lens = np.diff(off)
    starts = [np.arange(s, s + L - n + 1) for s, L in zip(off[:-1], lens) if L >= n]
    return np.concatenate(starts) if starts else np.zeros(0, np.int64)


def count_ngrams(source, vocab: Vocabulary, N: int, bos_eos: bool = False,
                 min_line: int | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Counts of every n-gram, n = 1..N, in natural (forward) sorted order.

    Windows never cross lines.  ``min_line`` skips shorter lines (default:
    keep all lines).
    """
    per = [[] for _ in range(N)]
    for chunk in iter_chunks(source, bos_eos=bos_eos):
        ids, off = encode_chunk(chunk, vocab)
        if min_line:
            keep = np.diff(off) >= min_line
            segs = [ids[a:b] for a, b, k in zip(off[:-1], off[1:], keep) if k]
            ids = np.concatenate(segs) if segs else np.zeros(0, np.int64)
            off = np.zeros(len(segs) + 1, np.int64)
            np.cumsum([len(s) for s in segs], out=off[1:])
        for n in range(1, N + 1):
            st = window_starts(off, n)
            if len(st):
                w = ids[st[:, None] + np.arange(n)].astype(np.uint32)
                w, c = radix_sort_context(w, np.ones(len(w), np.uint64), V=vocab.V)
                per[n - 1].append(combine_sorted(w, c))
    out = []
    for n in range(1, N + 1):
        if not per[n - 1]:
            out.append((np.zeros((0, n), np.int64), np.zeros(0, np.int64)))
            continue
        w = np.concatenate([p[0] for p in per[n - 1]])
        c = np.concatenate([p[1] for p in per[n - 1]])
        o = sort_order(w, "unsorted")
        w, c = combine_sorted(w[o], c[o])
        out.append((w.astype(np.int64), c.astype(np.int64)))
    return out


def write_counts(path: str, grams: np.ndarray, counts: np.ndarray, vocab: Vocabulary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row, c in zip(grams, counts):
            fh.write(" ".join(vocab.tokens[int(i)] for i in row) + "\t" + str(int(c)) + "\n")


def read_counts(path: str) -> list[tuple[list[str], int]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise ValueError(f"{path}:{ln}: expected 'gram<TAB>count'")
            g, c = line.rsplit("\t", 1)
            out.append((g.split(), int(c)))
    return out


def load_count_files(paths) -> tuple[Vocabulary, list[np.ndarray], list[np.ndarray]]:
    """Per-order (ids, counts), forward-sorted, from "gram<TAB>count" files.

    Orders come from gram lengths, so one file may mix orders.  Ids rank
    tokens by how many stored grams they appear in.  Orders with no grams
    between 1 and the maximum are rejected.
    """
    by_order: dict[int, list] = {}
    occ: Counter = Counter()
    for p in paths:
        for toks, c in read_counts(p):
            by_order.setdefault(len(toks), []).append((toks, c))
            occ.update(toks)
    if not by_order:
        raise ValueError("no grams in the count files")
    N = max(by_order)
    missing = [n for n in range(2, N + 1) if n not in by_order]
    if missing:
        raise ValueError(f"no grams of order {missing[0]}")
    vocab = Vocabulary.build(occ)
    grams, counts = [], []
    for n in range(1, N + 1):
        rows = by_order.get(n, [])
        flat = [t for toks, _ in rows for t in toks]
        ids = vocab.lookup_many(flat).reshape(-1, n) if flat else np.zeros((0, n), np.int64)
        c = np.array([x for _, x in rows], np.int64)
        o = np.lexsort(ids.T[::-1]) if len(ids) else np.zeros(0, np.int64)
        grams.append(ids[o])
        counts.append(c[o])
    return vocab, grams, counts
