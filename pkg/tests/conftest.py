import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oracles import zipf_corpus  # noqa: E402

from ngramkit.vocabulary import Vocabulary  # noqa: E402

# The four-word trie example: unigrams, 9 bigrams, 6 trigrams.
FIXTURE_GRAMS = {
    1: ["A", "B", "C", "D"],
    2: ["A A", "A C", "B B", "B C", "B D", "C A", "C D", "D B", "D D"],
    3: ["A A C", "B B C", "B B D", "B C D", "D B B", "D B C"],
}


@pytest.fixture(scope="session")
def trie_fixture():
    vocab = Vocabulary.from_ordered(list("ABCD"))
    grams, counts = [], []
    c = 1
    for n in (1, 2, 3):
        g = np.array([[vocab[t] for t in s.split()] for s in FIXTURE_GRAMS[n]], np.int64)
        grams.append(g)
        counts.append(np.arange(c, c + len(g), dtype=np.int64) * 3)
        c += len(g)
    return vocab, grams, counts


@pytest.fixture(scope="session")
def small_corpus():
    return zipf_corpus(1000)


@pytest.fixture(scope="session")
def medium_corpus():
    return zipf_corpus(10000, seed=3)
