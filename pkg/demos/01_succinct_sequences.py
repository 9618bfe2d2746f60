# Elias-Fano and its partitioned variant on monotone sequences.
#
# Run: python demos/01_succinct_sequences.py

# %%
import math

import numpy as np

from ngramkit.succinct import cw_encode, cwarray_build, ef_access, ef_build, ef_find, pef_build

rng = np.random.default_rng(0)

# %% A sparse, uniformly spread sequence: EF sits right at its bound.
m, u = 100_000, 10**9
v = np.sort(rng.integers(0, u, size=m))
ef = ef_build(v, u)
bound = m * math.ceil(math.log2(u / m)) + 2 * m
print(f"EF  {ef.payload_bits() / m:6.2f} bits/value  (bound {bound / m:.2f})")
print("v[1234] =", ef_access(ef, 1234), "==", v[1234])

# %% Clustered values: partitioning adapts the low width per block.
runs = [np.arange(s, s + 500) for s in rng.integers(0, u, size=200)]
c = np.sort(np.concatenate(runs))
for name, seq in [("EF ", ef_build(c, u)), ("PEF", pef_build(c, u, block_size=128))]:
    print(f"{name} {seq.payload_bits() / len(c):6.2f} bits/value on clustered data")

# %% Range search is what the trie uses to find a child among its siblings.
seq = ef_build([0, 2, 3, 4, 5, 5, 8, 9, 11], 12)
print("find 4 in [2, 5):", ef_find(seq, 2, 5, 4))

# %% Ranked codewords: small ranks get short codes.
print("codewords of ranks 0..6:", [cw_encode(i) for i in range(7)])
ranks = np.minimum(rng.zipf(1.7, size=50_000) - 1, 10**5)
arr = cwarray_build(ranks)
print(f"codeword array: {arr.size_bits / len(ranks):.2f} bits/value with select samples")
