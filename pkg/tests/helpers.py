"""Shared fixtures-as-functions for the estimation, scoring and acceptance tests."""

from __future__ import annotations

import tempfile

import numpy as np

from ngramkit.estimation import (
    Discounts,
    ModelConstants,
    adjusting_pass,
    counting_pass,
    last_pass,
    record_cost,
)
from ngramkit.scoring import score_ids
from ngramkit.vocabulary import Vocabulary

# The 16-token sentence whose twelve 5-grams form the count-indexing example.
CI_LINE = "A C B A C X X X X A B A A C B A"
CI_BN = ["ABAAC", "XABAA", "ACBAC", "XXXAB", "XXABA", "AACBA", "BAACB", "CBACX",
         "BACXX", "ACXXX", "CXXXX", "XXXXA"]


def count_indexing_fixture():
    """Run the three passes over the example sentence with stand-in discounts.

    The sentence is far too small for closed-form discounts, so D = (0.5, 1, 1.5)
    replaces them; placement does not depend on the values.
    """
    vocab = Vocabulary.from_ordered(list("ABCX"))
    N = 5
    tmp = tempfile.mkdtemp(prefix="ngramkit-test-")
    cnt = counting_pass([CI_LINE], N, 1 << 20, tmp, vocab=vocab)
    adj = adjusting_pass(cnt.files, N, vocab.V, tmp, with_discounts=False)
    D = np.zeros((N + 1, 4))
    D[:, 1:] = [0.5, 1.0, 1.5]
    adj.discounts = Discounts(D)
    adj.constants = ModelConstants(vocab.V, int(adj.state.a1.sum()), 0.5)
    last = last_pass(adj.bn, N, vocab, adj, cnt.heads)
    return vocab, cnt, adj, last


def letters(ids):
    return "".join("ABCX"[int(i)] for i in ids)


def flush_count(lines, N, budget, tmp_dir=None):
    tmp = tmp_dir or tempfile.mkdtemp(prefix="ngramkit-test-")
    return len(counting_pass(lines, N, budget, tmp).files)


def budget_for_flushes(lines, N, target):
    """Smallest-found RAM budget whose counting pass writes exactly ``target`` blocks."""
    rc = record_cost(N)
    lo, hi = 1, 1 << 24  # in records
    while lo < hi:
        mid = (lo + hi) // 2
        if flush_count(lines, N, mid * rc) <= target:
            hi = mid
        else:
            lo = mid + 1
    for cap in range(lo, lo + 64):
        if flush_count(lines, N, cap * rc) == target:
            return cap * rc
    raise AssertionError(f"no budget gives {target} flushes")


def context_mass(index, ctx):
    """Σ_w P(w | ctx) over the whole vocabulary, by batch scoring ctx·w lines."""
    V = index.vocab.V
    n = len(ctx) + 1
    ids = np.empty((V, n), np.int64)
    ids[:, :-1] = np.asarray(ctx, np.int64)
    ids[:, -1] = np.arange(V)
    off = np.arange(0, V * n + 1, n, dtype=np.int64)
    out = score_ids(index, ids.ravel(), off)
    return float(np.sum(10.0 ** out[n - 1::n]))


def vocab_map(vocab):
    return {t: i for i, t in enumerate(vocab.tokens)}
