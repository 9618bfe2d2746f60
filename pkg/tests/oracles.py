"""Slow, obviously-correct references used to freeze and check derived values."""

from __future__ import annotations

import math
from collections import Counter, defaultdict

import numpy as np


def zipf_corpus(n_lines, vocab=5000, s=1.1, phrases=20000, seed=0):
    """Synthetic sentences over tokens ``w0 .. w{vocab-1}``.

    Each line strings together one to five units.  A unit is either a single
    Zipf-drawn token or a phrase (2-6 Zipf tokens) drawn Zipf-wise from a
    fixed pool, so long grams recur behind varying left neighbours.
    """
    rng = np.random.default_rng(seed)
    p = 1.0 / np.arange(1, vocab + 1) ** s
    p /= p.sum()
    names = np.array([f"w{t}" for t in range(vocab)], dtype=object)
    plen = rng.integers(2, 7, size=phrases)
    ptok = rng.choice(vocab, size=int(plen.sum()), p=p)
    cut = np.cumsum(plen)[:-1]
    pool = np.array([" ".join(x) for x in np.split(names[ptok], cut)], dtype=object)
    q = 1.0 / np.arange(1, phrases + 1)
    q /= q.sum()
    units = rng.integers(1, 6, size=n_lines)
    T = int(units.sum())
    is_phrase = rng.random(T) < 0.5
    text = names[rng.choice(vocab, size=T, p=p)]
    text[is_phrase] = pool[rng.choice(phrases, size=int(is_phrase.sum()), p=q)]
    return [" ".join(x) for x in np.split(text, np.cumsum(units)[:-1])]


def windows(lines, N, vocab=None):
    """Counter of N-token windows (tuples of ids, or tokens when ``vocab`` is None)."""
    W = Counter()
    for line in lines:
        t = line.split()
        if vocab is not None:
            t = [vocab[x] for x in t]
        for i in range(len(t) - N + 1):
            W[tuple(t[i:i + N])] += 1
    return W


def left_extensions(W, N):
    """a_n(g) for n = 1..N from the window multiset."""
    a = {N: dict(W)}
    for n in range(1, N):
        left = defaultdict(set)
        for w in W:
            left[w[N - n:]].add(w[N - n - 1])
        a[n] = {g: len(s) for g, s in left.items()}
    return a


def totals(a, N):
    t = {}
    for n in range(1, N + 1):
        c = Counter(a[n].values())
        t[n] = tuple(c[k] for k in range(1, 5))
    return t


def discounts(t1, t2, t3, t4):
    t = [None, t1, t2, t3, t4]
    return [0.0] + [k - (k + 1) * t1 * t[k + 1] / ((t1 + 2 * t2) * t[k]) for k in (1, 2, 3)]


def reference_model(lines, N, vocab):
    """Interpolated modified Kneser-Ney from hash-map counts.

    ``vocab`` maps token -> id (all corpus tokens plus unk).  Returns
    {gram id tuple: (p, b or None)} over the model gram set: all unigrams,
    every n-gram inside a window for n < N, and the windows.
    """
    V = len(vocab)
    W = windows(lines, N, vocab)
    a = left_extensions(W, N)
    t = totals(a, N)
    D = {n: discounts(*t[n]) for n in range(1, N + 1)}
    a1 = a[1] if N > 1 else {g: c for g, c in W.items()}
    m2 = sum(a1.values())
    nk = Counter(min(v, 3) for v in a1.values())
    b_eps = sum(D[1][k] * nk[k] for k in (1, 2, 3)) / m2
    P = {}
    for w in range(V):
        k = a1.get((w,), 0)
        P[(w,)] = (k - D[1][min(k, 3)]) / m2 + b_eps / V
    B = {}
    for n in range(2, N + 1):
        runs = defaultdict(list)
        for g, k in a[n].items():
            runs[g[:-1]].append((g, k))
        for ctx, mem in runs.items():
            d = sum(k for _, k in mem)
            c = Counter(min(k, 3) for _, k in mem)
            bnum = sum(D[n][k] * c[k] for k in (1, 2, 3))
            B[ctx] = bnum / d
            for g, k in mem:
                P[g] = (k - D[n][min(k, 3)]) / d + bnum / d * P[g[1:]]

    def query(g):
        if g in P:
            return P[g]
        return B.get(g[:-1], 1.0) * query(g[1:])

    grams = set(W)
    for w in W:
        for n in range(1, N):
            for s in range(N - n + 1):
                grams.add(w[s:s + n])
    grams.update((w,) for w in range(V))
    out = {}
    for g in grams:
        b = None if len(g) == N else B.get(g, 1.0)
        out[g] = (query(g), b)
    return out


def linear_select1(bits, k):
    """Position of the k-th set bit (0-based k) by linear scan."""
    seen = -1
    for i, b in enumerate(bits):
        if b:
            seen += 1
            if seen == k:
                return i
    raise IndexError(k)


def score_sentence_stateless(index, tokens):
    """Per-word log10 probabilities by the textbook backoff recursion.

    Re-walks the reversed trie from scratch for every position: find the
    longest stored gram ending at the word, then add log10 backoffs of each
    longer stored context.
    """
    N = index.N
    unk = index.vocab.lookup("<unk>")
    ids = [index.vocab.lookup(t) for t in tokens]
    ids = [unk if i is None else i for i in ids]
    out = []
    for i, w in enumerate(ids):
        hist = ids[max(0, i - N + 1):i]
        L = 1
        while L <= len(hist):
            g = hist[len(hist) - L:] + [w]
            if index.find_path(g[::-1]) is None:
                break
            L += 1
        L -= 1
        n = L + 1
        pos = index.find_path(([w] + hist[::-1])[:n])
        lp = index.plog_at(n, pos)
        for m in range(L + 1, len(hist) + 1):
            ctx = hist[len(hist) - m:]
            cp = index.find_path(ctx[::-1])
            if cp is None:
                break
            lp += index.blog_at(m, cp)
        out.append(lp)
    return out


def log10_sum(xs):
    return math.fsum(xs)
