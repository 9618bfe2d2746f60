"""Acceptance criteria 1-12, one test each, with a pass/fail line per criterion.

Run with ``pytest tests/test_acceptance.py`` (the summary is printed at the end
of the session) or ``python tests/test_acceptance.py``.
"""

import math
import os
import random
import sys
import tempfile
import time

import numpy as np
import pytest
from conftest import FIXTURE_GRAMS
from helpers import budget_for_flushes, context_mass, count_indexing_fixture, letters, vocab_map
from oracles import (
    left_extensions,
    reference_model,
    score_sentence_stateless,
    totals,
    windows,
    zipf_corpus,
)

from ngramkit.blocks import fc_compress_window, fc_decompress_window
from ngramkit.corpus import build_vocabulary, count_ngrams
from ngramkit.estimation import adjusting_pass, counting_pass, discounts_from_t, estimate
from ngramkit.hashindex import HashIndex
from ngramkit.mph import MinimalPerfectHash, pack_keys
from ngramkit.scoring import perplexity, score_sentence
from ngramkit.succinct import ef_build
from ngramkit.trie import TrieIndex
from ngramkit.vocabulary import UNK, Vocabulary

RESULTS = {}


def record(n, ok, detail):
    RESULTS[n] = (bool(ok), detail)
    assert ok, detail


@pytest.fixture(scope="module", autouse=True)
def summary(request):
    yield
    rep = request.config.pluginmanager.get_plugin("terminalreporter")
    lines = [f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {d}"
             for n, (ok, d) in sorted(RESULTS.items())]
    for line in lines:
        if rep is not None:
            rep.write_line(line)
        else:
            print(line)


@pytest.fixture(scope="module")
def big_corpus():
    return zipf_corpus(100_000)


@pytest.fixture(scope="module")
def big_counts(big_corpus):
    vocab = build_vocabulary(big_corpus)
    cnt = count_ngrams(big_corpus, vocab, 5)
    return vocab, [g for g, _ in cnt], [c for _, c in cnt]


def alien_grams(rng, stored_sets, V, m, orders=(2, 3, 4, 5)):
    out = []
    while len(out) < m:
        n = int(rng.choice(orders))
        g = tuple(int(x) for x in rng.integers(0, V, size=n))
        if g not in stored_sets[n]:
            out.append(g)
    return out


# --------------------------------------------------------------------------- 1


def test_c01_elias_fano_bound():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst = 0
    for _ in range(1000):
        m = int(rng.integers(1, 3000))
        u = int(rng.integers(m, 1 << int(rng.integers(12, 44))))
        v = np.sort(rng.integers(0, u, size=m))
        seq = ef_build(v, u)
        bound = m * max(0, math.ceil(math.log2(u / m))) + 2 * m + 64
        if seq.payload_bits() > bound or not np.array_equal(seq.to_numpy(), v):
            record(1, False, f"bound or round trip broken at m={m}, u={u}")
        worst = max(worst, seq.payload_bits() / bound)
    dt = time.perf_counter() - t0
    record(1, dt < 10, f"1000 cases, max bits/bound {worst:.3f}, {dt:.2f} s")


# --------------------------------------------------------------------------- 2


def test_c02_trie_fixture(trie_fixture):
    vocab, grams, counts = trie_fixture
    t = TrieIndex.build(grams, counts, vocab)
    ids = t.level_ids(2).tolist()
    ptr = t.level_pointers(1).tolist()
    strings = [g for n in (1, 2, 3) for g in FIXTURE_GRAMS[n]]
    found = t.lookup_many(strings) == np.concatenate(counts).tolist()
    ok = ids == [0, 2, 3, 4, 5, 5, 8, 9, 11] and ptr == [0, 2, 5, 7, 9] and found
    record(2, ok, f"level-2 ids {ids}, pointers {ptr}, 19 lookups ok={found}")


# --------------------------------------------------------------------------- 3


def test_c03_remap_lossless(big_counts):
    vocab, grams, counts = big_counts
    tries = [TrieIndex.build(grams, counts, vocab, remap=k) for k in (0, 1, 2)]
    rng = np.random.default_rng(3)
    stored = {n: set(map(tuple, g.tolist())) for n, g in enumerate(grams, 1)}
    pick = []
    for _ in range(10_000):
        n = int(rng.integers(1, 6))
        i = int(rng.integers(0, len(grams[n - 1])))
        pick.append((n, i))
    ok = True
    for tr in tries:
        for n in range(1, 6):
            idx = [i for m, i in pick if m == n]
            got = tr.lookup_counts_ids(grams[n - 1][idx], np.full(len(idx), n))
            ok &= np.array_equal(got, counts[n - 1][idx])
    alien = alien_grams(rng, stored, vocab.V - 1, 10_000)
    misses = 0
    for tr in tries:
        for n in range(2, 6):
            g = np.array([a for a in alien if len(a) == n], np.int64).reshape(-1, n)
            misses += int(np.sum(tr.locate_ids(g) < 0))
    bits = [tr.total_id_bits() for tr in tries]
    ok = ok and misses == 3 * len(alien) and bits[2] < bits[0]
    record(3, ok, f"10^4 stored equal across k, aliens not found {misses}/{3 * len(alien)}, "
                  f"id bits k=0 {bits[0]} k=1 {bits[1]} k=2 {bits[2]}")


# --------------------------------------------------------------------------- 4


def test_c04_left_extensions(big_corpus):
    t0 = time.perf_counter()
    ok = True
    checked = 0
    for N in (2, 3, 5):
        res = estimate(big_corpus, order=N)
        vm = vocab_map(res.vocab)
        ref = left_extensions(windows(big_corpus, N, vm), N)
        mc = res.last.modified_counts()
        for n in range(2, N + 1):
            g, a = mc[n]
            ok &= dict(zip(map(tuple, g.tolist()), a.tolist())) == ref[n]
            checked += len(g)
        a1 = res.adjusting.state.a1
        ok &= {(int(i),): int(a1[i]) for i in np.nonzero(a1)[0]} == ref[1]
        T = res.adjusting.smoothing.T
        tt = totals(ref, N)
        ok &= all(tuple(T[n, 1:5]) == tt[n] for n in range(1, N + 1))
    _, _, _, last = count_indexing_fixture()
    g, a = last.modified_counts()[2]
    ac = {letters(x): int(y) for x, y in zip(g, a)}["AC"]
    dt = time.perf_counter() - t0
    ok = ok and ac == 2 and dt < 60
    record(4, ok, f"{checked} grams and all T[n][k] match brute force at N=2,3,5; "
                  f"a(AC)={ac}; {dt:.1f} s")


# --------------------------------------------------------------------------- 5


def test_c05_discounts():
    D = discounts_from_t(4, 2, 1, 1)[1:]
    ok = np.max(np.abs(D - [0.5, 1.25, 1.0])) <= 1e-12
    record(5, ok, f"D = {tuple(float(x) for x in D)}")


# --------------------------------------------------------------------------- 6


def test_c06_end_to_end(small_corpus):
    ok = True
    same = True
    worst = 0.0
    for N in (2, 3, 5):
        blobs = []
        ref = None
        for target in (1, 4, 16):
            budget = budget_for_flushes(small_corpus, N, target)
            res = estimate(small_corpus, order=N, ram_budget=budget, quant_bits=None)
            ok &= len(res.counting.files) == target
            blobs.append(res.index.serialize())
            got = res.model.as_dict()
            if ref is None:
                ref = reference_model(small_corpus, N, vocab_map(res.vocab))
            ok &= set(got) == set(ref)
            for g, (p, b) in ref.items():
                gp, gb = got[g]
                worst = max(worst, abs(gp - p), 0 if b is None else abs(gb - b))
                ok &= (gb is None) == (b is None)
        same &= blobs[0] == blobs[1] == blobs[2]
    ok = ok and same and worst <= 1e-6
    record(6, ok, f"N=2,3,5 at 1/4/16 flushes: max |p|,|b| error {worst:.2e}, "
                  f"outputs byte-identical={same}")


# --------------------------------------------------------------------------- 7


def test_c07_normalization():
    lines = zipf_corpus(10_000, seed=3)
    res = estimate(lines, order=5, quant_bits=None)
    rng = random.Random(7)
    worst = abs(context_mass(res.index, []) - 1)
    for n in range(1, 5):
        grams = res.model.grams(n)
        for i in rng.sample(range(len(grams)), 100):
            worst = max(worst, abs(context_mass(res.index, grams[i]) - 1))
    record(7, worst <= 1e-6, f"400 stored contexts (orders 1-4) plus empty: max |sum-1| "
                             f"{worst:.2e} (unquantized payloads)")


# --------------------------------------------------------------------------- 8


def test_c08_single_sort(small_corpus):
    N = 5
    budget = budget_for_flushes(small_corpus, N, 4)
    res = estimate(small_corpus, order=N, ram_budget=budget)
    tags = {t for t, _ in res.io.records_written}
    orders = {n for _, n in res.io.records_written}
    _, _, adj, last = count_indexing_fixture()
    p5 = last.positions_seed[5][:4].tolist()
    p2 = last.positions_seed[2][:4].tolist()
    ok = (orders == {N} and tags == {"counting", "B_N"} and res.adjusting.merges == 1
          and p5 == [0, 4, 6, 8] and p2 == [0, 3, 5, 6])
    record(8, ok, f"records on disk only of order {sorted(orders)}, tags {sorted(tags)}, "
                  f"merges {res.adjusting.merges}; positions {p5} and {p2}")


# --------------------------------------------------------------------------- 9


def test_c09_front_coding():
    lines = zipf_corpus(10_000, seed=3)
    N = 5
    with tempfile.TemporaryDirectory() as tmp:
        cnt = counting_pass(lines, N, 200_000, tmp, window_bytes=1 << 16)
        adj = adjusting_pass(cnt.files, N, cnt.vocab.V, tmp, window_bytes=1 << 16,
                             with_discounts=False)
        ok = True
        raw = comp = 0
        recs = 0
        for w, c in adj.bn.windows():
            win = fc_compress_window(w, c)
            rw, rc = fc_decompress_window(win)
            ok &= np.array_equal(rw, w) and np.array_equal(rc, c)
            raw += len(w) * (4 * N + 8)
            comp += len(win.body)
            recs += len(w)
        W = windows(lines, N, vocab_map(cnt.vocab))
        bw, bc = adj.bn.read_all()
        ok &= dict(zip(map(tuple, bw.tolist()), bc.tolist())) == dict(W)
        fsize = adj.bn.size_bytes()
    ratio = comp / raw
    ok = ok and ratio <= 0.5
    record(9, ok, f"{recs} B_N records round trip; compressed/raw {ratio:.3f} "
                  f"(file {fsize} bytes)")


# -------------------------------------------------------------------------- 10


def test_c10_hash_index(big_counts):
    keys = [f"key-{i}".encode() for i in range(1_000_000)]
    buf, offs = pack_keys(keys)
    h = MinimalPerfectHash.build_packed(buf, offs, checked=True)
    minimal = np.array_equal(np.sort(h.eval_packed(buf, offs)), np.arange(len(keys)))
    vocab, grams, counts = big_counts
    hi = HashIndex.build(grams, counts, vocab)
    tr = TrieIndex.build(grams, counts, vocab, remap=1)
    same = True
    total = 0
    for n, g in enumerate(grams, 1):
        slots = hi.lookup_ids(g)
        t = hi.tables[n - 1]
        hv = t.values[t.index[slots]].astype(np.int64)
        tv = tr.lookup_counts_ids(g, np.full(len(g), n))
        same &= bool(np.all(slots >= 0)) and np.array_equal(hv, tv)
        total += len(g)
    rng = np.random.default_rng(10)
    stored = {n: set(map(tuple, g.tolist())) for n, g in enumerate(grams, 1)}
    fp = 0
    probes = 0
    while probes < 1_000_000:
        n = int(rng.integers(2, 6))
        cand = rng.integers(0, vocab.V - 1, size=(50_000, n))
        keep = np.array([tuple(r) not in stored[n] for r in cand.tolist()])
        cand = cand[keep][:1_000_000 - probes]
        fp += int(np.sum(hi.lookup_ids(cand) >= 0))
        probes += len(cand)
    ok = minimal and same and fp == 0
    record(10, ok, f"MPH minimal over 10^6 keys ({h.bits_per_key():.2f} bits/key); "
                   f"hash = trie on {total} grams; {fp} false positives in {probes} probes")


# -------------------------------------------------------------------------- 11


def test_c11_scoring():
    lines = zipf_corpus(10_000, seed=11)
    res = estimate(lines, order=5)
    held = zipf_corpus(10_000, seed=12)
    diff = sum(score_sentence(res.index, s.split()).tolist() != score_sentence_stateless(
        res.index, s.split()) for s in held)
    V = 64
    toks = [f"t{i}" for i in range(V - 1)] + [UNK]
    vocab = Vocabulary.from_ordered(toks)
    t = TrieIndex.build([np.arange(V).reshape(-1, 1)],
                        [np.column_stack([np.full(V, 1 / V), np.ones(V)])], vocab,
                        direction="reversed", payload="prob", quant_bits=None)
    rng = np.random.default_rng(0)
    text = [" ".join(rng.choice(toks[:-1], size=9)) for _ in range(300)]
    pp = perplexity(t, text).perplexity
    ok = diff == 0 and abs(pp - V) <= 1e-12 * V
    record(11, ok, f"{diff} of 10^4 sentences differ stateful vs stateless; "
                   f"uniform perplexity {pp!r} for V={V}")


# -------------------------------------------------------------------------- 12


def test_c12_throughput(tmp_path, big_counts):
    path = tmp_path / "ten_mb.txt"
    with open(path, "w") as fh:
        size, seed = 0, 100
        while size < 10 << 20:
            text = "\n".join(zipf_corpus(50_000, seed=seed)) + "\n"
            fh.write(text)
            size += len(text)
            seed += 1
    t0 = time.perf_counter()
    res = estimate(str(path), order=5)
    est = time.perf_counter() - t0
    vocab, grams, counts = big_counts
    tr = TrieIndex.build(grams, counts, vocab)
    rng = np.random.default_rng(12)
    n = 5
    q = grams[n - 1][rng.integers(0, len(grams[n - 1]), size=1_000_000)]
    tr.locate_ids(q[:10])  # warm the compiled kernel
    t0 = time.perf_counter()
    pos = tr.locate_ids(q)
    look = time.perf_counter() - t0
    ok = est < 60 and look < 10 and bool(np.all(pos >= 0))
    record(12, ok, f"{size / 2**20:.1f} MB estimated in {est:.1f} s "
                   f"({res.model.num_grams()} grams); 10^6 5-gram lookups in {look:.2f} s")


if __name__ == "__main__":
    sys.exit(pytest.main([os.path.abspath(__file__), "-q"]))
