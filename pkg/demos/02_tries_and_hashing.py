# Count indexes over n-grams: the Elias-Fano trie, context remapping, and
# the minimal-perfect-hash alternative.
#
# Run: python demos/02_tries_and_hashing.py

# %%
import time

import numpy as np
from synthetic import sentences

from ngramkit.corpus import build_vocabulary, count_ngrams
from ngramkit.hashindex import HashIndex
from ngramkit.trie import TrieIndex

lines = sentences(30_000)
vocab = build_vocabulary(lines)
counted = count_ngrams(lines, vocab, 4)
grams = [g for g, _ in counted]
counts = [c for _, c in counted]
total = sum(len(g) for g in grams)
print(f"{len(lines)} sentences, V = {vocab.V}, {total} distinct grams of order 1-4")

# %% The remapped id of a word is its rank among the followers of its context,
# so the id sequences shrink as k grows.
tries = {}
for k in (0, 1, 2):
    t0 = time.perf_counter()
    tries[k] = TrieIndex.build(grams, counts, vocab, remap=k)
    dt = time.perf_counter() - t0
    t = tries[k]
    print(f"k={k}: {t.total_id_bits() / total:5.2f} id bits/gram, "
          f"{t.size_bytes() * 8 / total:5.2f} total bits/gram, built in {dt:.2f} s")

# %% Same answers whatever k is.
probe = [" ".join(vocab.tokens[i] for i in row) for row in grams[3][:5]]
for g in probe:
    print(f"{g!r:40} -> {[tries[k].lookup(g) for k in (0, 1, 2)]}")

# %% A hash index answers the same queries with one probe per gram.
h = HashIndex.build(grams, counts, vocab)
print(f"hash index: {h.size_bytes() * 8 / total:.2f} bits/gram")
assert h.lookup_many(probe) == tries[0].lookup_many(probe)
stored = set(map(tuple, grams[3].tolist()))
alien = next(tuple(r[::-1]) for r in grams[3].tolist() if tuple(r[::-1]) not in stored)
alien = " ".join(vocab.tokens[i] for i in alien)
print(f"unseen gram {alien!r}:", h.lookup(alien), tries[2].lookup(alien))

# %% Batched lookups stay inside compiled code.
q = grams[3][np.random.default_rng(1).integers(0, len(grams[3]), size=200_000)]
for name, fn in [("trie k=0", lambda: tries[0].locate_ids(q)), ("hash", lambda: h.lookup_ids(q))]:
    fn()
    t0 = time.perf_counter()
    fn()
    print(f"{name:8}: {(time.perf_counter() - t0) / len(q) * 1e6:.2f} us per 4-gram")
