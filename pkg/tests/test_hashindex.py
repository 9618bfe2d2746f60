import numpy as np
import pytest
from conftest import FIXTURE_GRAMS

from ngramkit.corpus import build_vocabulary, count_ngrams
from ngramkit.errors import BuildError
from ngramkit.hashindex import HashIndex
from ngramkit.trie import TrieIndex


def strings():
    return [g for n in (1, 2, 3) for g in FIXTURE_GRAMS[n]]


def test_fixture_table_sizes_and_lookups(trie_fixture):
    vocab, grams, counts = trie_fixture
    h = HashIndex.build(grams, counts, vocab)
    assert [len(t) for t in h.tables] == [4, 9, 6]
    assert h.lookup_many(strings()) == np.concatenate(counts).tolist()
    assert h.lookup("C A C") is None
    assert h.lookup("A B C D") is None


def test_hash_agrees_with_trie(small_corpus):
    vocab = build_vocabulary(small_corpus)
    cnt = count_ngrams(small_corpus, vocab, 4)
    grams = [g for g, _ in cnt]
    counts = [c for _, c in cnt]
    h = HashIndex.build(grams, counts, vocab)
    t = TrieIndex.build(grams, counts, vocab, remap=1)
    for n, (g, c) in enumerate(cnt, 1):
        slots = h.lookup_ids(g)
        assert np.all(slots >= 0)
        got = [h.payload_at(n, int(s)) for s in slots]
        assert got == c.tolist()
        assert np.array_equal(t.lookup_counts_ids(g, np.full(len(g), n)), c)


def test_alien_grams_not_found(small_corpus):
    vocab = build_vocabulary(small_corpus)
    cnt = count_ngrams(small_corpus, vocab, 3)
    h = HashIndex.build([g for g, _ in cnt], [c for _, c in cnt], vocab)
    stored = {tuple(r) for r in cnt[2][0].tolist()}
    rng = np.random.default_rng(5)
    probe = rng.integers(0, len(vocab) - 1, size=(20000, 3))
    alien = np.array([r for r in probe.tolist() if tuple(r) not in stored])
    assert len(alien) > 15000
    assert np.all(h.lookup_ids(alien) < 0)


def test_oov_token(trie_fixture):
    vocab, grams, counts = trie_fixture
    h = HashIndex.build(grams, counts, vocab)
    assert h.lookup("A Z") is None
    assert np.all(h.lookup_ids(np.array([[0, -1]])) < 0)


def test_duplicate_gram_rejected(trie_fixture):
    vocab, grams, counts = trie_fixture
    dup = np.vstack([grams[1], grams[1][:1]])
    with pytest.raises(BuildError, match="duplicate"):
        HashIndex.build([grams[0], dup], [counts[0], np.ones(len(dup))], vocab)


def test_serialize_round_trip(trie_fixture, tmp_path):
    vocab, grams, counts = trie_fixture
    h = HashIndex.build(grams, counts, vocab, seed=7)
    p = str(tmp_path / "h.idx")
    h.save(p)
    back = HashIndex.load(p)
    assert back.lookup_many(strings()) == h.lookup_many(strings())
    assert back.serialize() == h.serialize()
    with pytest.raises(BuildError):
        HashIndex.deserialize(b"JUNK" + h.serialize()[4:])


def test_prob_payloads(trie_fixture):
    vocab, grams, _ = trie_fixture
    pays = [np.column_stack([np.full(len(g), -0.5 * n), np.full(len(g), -0.25)]) for n, g in
            enumerate(grams, 1)]
    h = HashIndex.build(grams, pays, vocab, payload="prob")
    p, b = h.lookup("B C D")
    assert p == pytest.approx(-1.5) and b == pytest.approx(-0.25)
