import math
import random

import numpy as np
import pytest
from helpers import (
    CI_BN,
    budget_for_flushes,
    context_mass,
    count_indexing_fixture,
    letters,
    vocab_map,
)
from oracles import discounts, left_extensions, reference_model, totals, windows, zipf_corpus

from ngramkit.errors import DegenerateStatisticsError
from ngramkit.estimation import (
    AdjustState,
    Discounts,
    ModelConstants,
    SmoothingStats,
    StatisticsTable,
    adjusting_pass,
    compute_discounts,
    compute_left_extensions,
    counting_pass,
    discounts_from_t,
    estimate,
    stats_update,
    unigram_prob,
    unigram_probs,
    write_arpa,
)
from ngramkit.vocabulary import Vocabulary

# ---------------------------------------------------------------- counting


def test_counting_bigram_example(tmp_path):
    res = counting_pass(["a b a a c"], 2, 1 << 20, str(tmp_path))
    assert len(res.files) == 1
    w, c = res.files[0].read_all()
    toks = res.vocab.tokens
    assert [(toks[x], toks[y]) for x, y in w.tolist()] == [("a", "a"), ("a", "b"), ("a", "c"),
                                                            ("b", "a")]
    assert c.tolist() == [1, 1, 1, 1]
    assert res.tokens == 5 and res.windows == 4


def test_counting_short_text(tmp_path):
    res = counting_pass(["a b"], 3, 1 << 20, str(tmp_path))
    assert res.files == [] and res.windows == 0


def test_counting_multiset_independent_of_budget(small_corpus, tmp_path):
    N = 3
    W = windows(small_corpus, N)
    for i, budget in enumerate([1 << 26, 5000]):
        d = tmp_path / str(i)
        d.mkdir()
        res = counting_pass(small_corpus, N, budget, str(d))
        toks = res.vocab.tokens
        got = {}
        for f in res.files:
            w, c = f.read_all()
            for row, k in zip(w.tolist(), c.tolist()):
                g = tuple(toks[x] for x in row)
                got[g] = got.get(g, 0) + k
        assert got == dict(W)
        if i:
            assert len(res.files) >= 4


# -------------------------------------------------------------- statistics


def test_stats_update_fresh_entry():
    st, sm = StatisticsTable(3, 5), SmoothingStats(3)
    assert stats_update(2, 1, 4, st, sm)
    assert st.a(2, 4) == 1 and sm.R[2, 1] == 1


def test_stats_update_repeated_left():
    st, sm = StatisticsTable(3, 5), SmoothingStats(3)
    stats_update(2, 1, 4, st, sm)
    assert not stats_update(2, 1, 4, st, sm)
    assert st.a(2, 4) == 1 and sm.R[2].tolist() == [0, 1, 0, 0, 0, 0]


def test_stats_update_three_lefts():
    st, sm = StatisticsTable(3, 5), SmoothingStats(3)
    for x in (0, 1, 2):
        stats_update(2, x, 4, st, sm)
    assert st.a(2, 4) == 3
    assert sm.R[2, 3] == 1 and sm.R[2, 1] == 0 and sm.R[2, 2] == 0


def test_stats_update_range_reset():
    st, sm = StatisticsTable(3, 5), SmoothingStats(3)
    stats_update(2, 0, 4, st, sm)
    stats_update(2, 1, 4, st, sm)
    st.ranges[2] += 1
    stats_update(2, 1, 4, st, sm)
    assert st.a(2, 4) == 1


# --------------------------------------------------------------- discounts


def test_discounts_fixture():
    D = discounts_from_t(4, 2, 1, 1)
    assert D[1:] == pytest.approx([0.5, 1.25, 1.0], abs=1e-12)
    assert D[0] == 0


def test_discounts_all_ones():
    assert discounts_from_t(1, 1, 1, 1)[1] == pytest.approx(1 / 3, abs=1e-15)


def test_discounts_match_oracle_formula():
    for t in [(40, 21, 9, 6), (100, 30, 15, 8), (7, 3, 2, 1)]:
        assert discounts_from_t(*t)[1:] == pytest.approx(discounts(*t)[1:], abs=1e-12)


@pytest.mark.parametrize("t", [(0, 1, 1, 1), (1, 0, 0, 0), (1, 1, 100, 1)])
def test_degenerate_discounts(t):
    with pytest.raises(DegenerateStatisticsError):
        discounts_from_t(*t)


def test_discount_fallback_is_opt_in():
    sm = SmoothingStats(2)
    sm.T[1, 1:] = [4, 2, 1, 1]
    sm.T[2, 1:] = [1, 1, 100, 1]
    with pytest.raises(DegenerateStatisticsError):
        compute_discounts(sm)
    d = compute_discounts(sm, fallback=(0.5, 1.0, 1.5))
    assert d(1, 2) == pytest.approx(1.25) and d(2, 7) == 1.5 and d(2, 0) == 0


# ------------------------------------------------------------ left extensions


def _adjust(lines, N, tmp_path, budget=1 << 24):
    cnt = counting_pass(lines, N, budget, str(tmp_path))
    adj = adjusting_pass(cnt.files, N, cnt.vocab.V, str(tmp_path), with_discounts=False)
    return cnt, adj


def test_bigram_example_m2_and_t(tmp_path):
    cnt, adj = _adjust(["a b a a c"], 2, tmp_path)
    assert int(adj.state.a1.sum()) == 4
    assert adj.smoothing.t(2, 1) == 4


def test_single_record(tmp_path):
    cnt, adj = _adjust(["x y z"], 3, tmp_path)
    a1 = adj.state.a1
    assert a1[cnt.vocab["z"]] == 1
    assert adj.smoothing.T[3, 1] == 1
    assert all(adj.smoothing.t(n, 1) == 1 for n in (1, 2))


@pytest.mark.parametrize("N", [2, 3, 5])
def test_smoothing_totals_match_brute_force(small_corpus, tmp_path, N):
    cnt, adj = _adjust(small_corpus, N, tmp_path, budget=20000)
    assert len(cnt.files) > 1
    ref = totals(left_extensions(windows(small_corpus, N), N), N)
    for n in range(1, N + 1):
        assert tuple(adj.smoothing.T[n, 1:5]) == ref[n]


def test_chunked_scan_equals_single_scan(small_corpus, tmp_path):
    cnt, adj = _adjust(small_corpus, 4, tmp_path)
    w, c = adj.bn.read_all()
    st = AdjustState(4, cnt.vocab.V)
    for lo in range(0, len(w), 777):
        compute_left_extensions(w[lo:lo + 777], c[lo:lo + 777], st)
    st.finish()
    assert np.array_equal(st.smoothing.T, adj.smoothing.T)
    assert np.array_equal(st.cnt_last, adj.state.cnt_last)


# ----------------------------------------------------------------- unigrams


def test_unigram_prob_unseen_word():
    D = Discounts(np.array([[0, 0, 0, 0], [0, 0.5, 1.0, 1.5]]))
    k = ModelConstants(V=10, m2=20, b_eps=0.3)
    assert unigram_prob(3, 0, D, k) == pytest.approx(0.03)
    assert unigram_prob(3, 4, D, k) == pytest.approx((4 - 1.5) / 20 + 0.03)


def test_unigrams_sum_to_one(small_corpus):
    res = estimate(small_corpus, order=3, quant_bits=None)
    adj = res.adjusting
    p = unigram_probs(adj.state.a1, adj.discounts, adj.constants)
    assert math.fsum(p) == pytest.approx(1.0, abs=1e-9)
    assert adj.constants.m2 == int(adj.state.a1.sum())


def test_single_word_corpus_hand_oracle():
    # "a a a", N=2: one bigram type (a a); a(a) = 1, m2 = 1, V = 2 with unk.
    # stand-in unigram totals; the corpus alone is degenerate
    D = Discounts(np.vstack([np.zeros(4), discounts_from_t(4, 2, 1, 1)]))
    k =ModelConstants(V=2, m2=1, b_eps=D(1, 1) * 1 / 1)
    pa = unigram_prob(0, 1, D, k)
    punk = unigram_prob(1, 0, D, k)
    assert pa == pytest.approx((1 - 0.5) / 1 + 0.25)
    assert pa + punk == pytest.approx(1.0)


# --------------------------------------------------------- count indexing


def test_count_indexing_fixture():
    vocab, cnt, adj, last = count_indexing_fixture()
    w, _ = adj.bn.read_all()
    assert [letters(r) for r in w] == CI_BN
    assert adj.state.cnt_last[5][:4].tolist() == [4, 2, 2, 4]
    assert adj.state.cnt_last[2][:4].tolist() == [3, 2, 1, 2]
    assert last.positions_seed[5][:4].tolist() == [0, 4, 6, 8]
    assert last.positions_seed[2][:4].tolist() == [0, 3, 5, 6]
    assert letters(last.S[5][1]) == "XXAXXBAACBAC"
    # ABAAC is the first record and lands at position 6 with first word A
    assert letters(last.S[5][1])[6] == "A"
    assert letters(last.S[2][1]) == "ABXACACX"
    assert last.S[2][2].tolist() == [0, 0, 0, 1, 1, 2, 3, 3]


def test_left_extensions_of_ac():
    vocab, _, _, last = count_indexing_fixture()
    grams, a = last.modified_counts()[2]
    got = {letters(g): int(x) for g, x in zip(grams, a)}
    assert got["AC"] == 2
    # brute force over the twelve windows
    ref = left_extensions(windows(["A C B A C X X X X A B A A C B A"], 5), 5)[2]
    assert got == {"".join(k): v for k, v in ref.items()}


@pytest.mark.parametrize("N", [2, 3, 5])
def test_modified_counts_match_brute_force(small_corpus, N):
    res = estimate(small_corpus, order=N, quant_bits=None)
    vm = vocab_map(res.vocab)
    ref = left_extensions(windows(small_corpus, N, vm), N)
    mc = res.last.modified_counts()
    for n in range(2, N + 1):
        g, a = mc[n]
        assert dict(zip(map(tuple, g.tolist()), a.tolist())) == ref[n]
    a1 = res.adjusting.state.a1
    assert {(i,): int(a1[i]) for i in np.nonzero(a1)[0]} == ref[1]


# --------------------------------------------------------------- end to end


@pytest.mark.parametrize("N", [2, 3, 5])
def test_matches_reference_estimator(small_corpus, N):
    res = estimate(small_corpus, order=N, quant_bits=None)
    ref = reference_model(small_corpus, N, vocab_map(res.vocab))
    got = res.model.as_dict()
    assert set(got) == set(ref)
    for g, (p, b) in ref.items():
        gp, gb = got[g]
        assert abs(gp - p) <= 1e-6
        assert (gb is None) == (b is None)
        if b is not None:
            assert abs(gb - b) <= 1e-6


def test_budget_invariance(small_corpus):
    N = 5
    blobs = []
    for target in (1, 4, 16):
        budget = budget_for_flushes(small_corpus, N, target)
        res = estimate(small_corpus, order=N, ram_budget=budget)
        assert len(res.counting.files) == target
        blobs.append(res.index.serialize())
    assert blobs[0] == blobs[1] == blobs[2]


def test_thread_invariance(small_corpus):
    a = estimate(small_corpus, order=4, threads=1).index.serialize()
    b = estimate(small_corpus, order=4, threads=3, ram_budget=30000).index.serialize()
    assert a == b


def test_deterministic_repeated_sentence():
    lines = ["the cat sat on the mat and the cat ran"] * 50 + ["a b c d e f g h"] * 3
    cfg = dict(order=3, discount_fallback=(0.5, 1.0, 1.5))
    a = estimate(lines, **cfg).index.serialize()
    b = estimate(lines, **cfg).index.serialize()
    assert a == b


def test_single_sort_accounting(small_corpus):
    N = 5
    budget = budget_for_flushes(small_corpus, N, 4)
    res = estimate(small_corpus, order=N, ram_budget=budget)
    io = res.io
    assert {tag for tag, _ in io.records_written} == {"counting", "B_N"}
    assert {n for _, n in io.records_written} == {N}
    assert res.adjusting.merges == 1


def test_normalization_on_sampled_contexts(small_corpus):
    res = estimate(small_corpus, order=4, quant_bits=None)
    model = res.model
    rng = random.Random(0)
    for n in range(1, 4):
        grams = model.grams(n)
        for i in rng.sample(range(len(grams)), min(30, len(grams))):
            assert context_mass(res.index, grams[i]) == pytest.approx(1.0, abs=1e-6)
    assert context_mass(res.index, []) == pytest.approx(1.0, abs=1e-6)


def test_order_out_of_range(small_corpus):
    with pytest.raises(ValueError):
        estimate(small_corpus, order=0)


def test_corpus_without_windows():
    with pytest.raises(ValueError):
        estimate(["a b"], order=3)


def test_arpa_output(small_corpus, tmp_path):
    res = estimate(small_corpus, order=3, quant_bits=None)
    p = tmp_path / "m.arpa"
    write_arpa(res.model, str(p))
    text = p.read_text().splitlines()
    assert text[0] == "\\data\\"
    for n in (1, 2, 3):
        assert f"ngram {n}={len(res.model.labels[n - 1])}" in text
    assert text[-1] == "\\end\\"
    start = text.index("\\2-grams:") + 1
    fields = text[start].split("\t")
    assert len(fields) == 3 and len(fields[1].split()) == 2
    g = tuple(res.vocab[t] for t in fields[1].split())
    assert float(fields[0]) == pytest.approx(math.log10(res.model.as_dict()[g][0]), abs=1e-6)


def test_degenerate_corpus_reports_order():
    lines = zipf_corpus(500)
    with pytest.raises(DegenerateStatisticsError):
        estimate(lines, order=5)
    res = estimate(lines, order=5, discount_fallback=(0.5, 1.0, 1.5))
    assert res.model.num_grams() > 0


def test_vocabulary_reused():
    v = Vocabulary.build({"p": 3, "q": 2, "r": 1})
    lines = ["p q r p q", "q r p"] * 5
    res = estimate(lines, order=2, vocab=v, discount_fallback=(0.5, 1.0, 1.5))
    assert res.vocab is v
