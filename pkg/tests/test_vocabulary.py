import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngramkit.errors import BuildError, ConstructionError
from ngramkit.mph import MinimalPerfectHash, pack_keys
from ngramkit.vocabulary import UNK, Vocabulary


def test_mph_small_is_minimal():
    h = MinimalPerfectHash.build(["A", "B", "C", "D"])
    assert sorted(h(k) for k in "ABCD") == [0, 1, 2, 3]


def test_mph_alien_key_lands_in_range():
    h = MinimalPerfectHash.build(["A", "B", "C", "D"])
    assert 0 <= h("ZZZ") < 4


def test_mph_million_keys_permutation():
    keys = [f"key-{i}".encode() for i in range(1_000_000)]
    buf, offs = pack_keys(keys)
    h = MinimalPerfectHash.build_packed(buf, offs, checked=True)
    slots = h.eval_packed(buf, offs)
    assert np.array_equal(np.sort(slots), np.arange(1_000_000))
    assert h.bits_per_key() < 3.5


def test_mph_rejects_duplicates_and_empty():
    with pytest.raises(ConstructionError):
        MinimalPerfectHash.build(["a", "b", "a"])
    with pytest.raises(ConstructionError):
        MinimalPerfectHash.build([])


def test_mph_serialize_round_trip():
    keys = [str(i) for i in range(5000)]
    h = MinimalPerfectHash.build(keys, seed=11)
    back, end = MinimalPerfectHash.deserialize(h.serialize())
    assert end == len(h.serialize())
    assert np.array_equal(back.eval_many(keys), h.eval_many(keys))


def test_vocab_equal_counts_tie_break():
    v = Vocabulary.build({"D": 1, "B": 1, "A": 1, "C": 1})
    assert [v[t] for t in "ABCD"] == [0, 1, 2, 3]
    assert v.lookup("A") == 0


def test_vocab_count_order():
    v = Vocabulary.build({"x": 10, "y": 3, "z": 7})
    assert (v["x"], v["z"], v["y"]) == (0, 1, 2)
    assert v.tokens[-1] == UNK


def test_vocab_absent_token():
    v = Vocabulary.build({"x": 1})
    assert v.lookup("nope") is None
    assert "nope" not in v
    with pytest.raises(KeyError):
        v["nope"]


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.text(min_size=1, max_size=8).filter(lambda s: s != UNK),
                       st.integers(1, 50), min_size=1, max_size=200))
def test_vocab_ids_follow_reference_sort(occ):
    v = Vocabulary.build(occ)
    ref = sorted(occ, key=lambda t: (-occ[t], t.encode("utf-8")))
    assert v.tokens[:len(ref)] == ref
    ids = v.lookup_many(ref)
    assert ids.tolist() == list(range(len(ref)))


def test_vocab_exhaustive_and_serialize():
    toks = {f"tok{i}": (i * 7919) % 113 + 1 for i in range(3000)}
    v = Vocabulary.build(toks)
    back, end = Vocabulary.deserialize(b"junk" + v.serialize(), 4)
    assert end == 4 + len(v.serialize())
    assert back.tokens == v.tokens
    assert np.array_equal(back.lookup_many(list(toks)), v.lookup_many(list(toks)))
    assert back.lookup("missing") is None


def test_vocab_empty_and_duplicate_input():
    with pytest.raises(BuildError):
        Vocabulary.build({})
    with pytest.raises(BuildError):
        Vocabulary.build([("a", 1), ("a", 2)])


def test_vocab_encode_maps_unknown_to_unk():
    v = Vocabulary.build({"a": 2, "b": 1})
    assert v.encode(["a", "zzz", "b"]).tolist() == [0, v.unk_id, 1]
