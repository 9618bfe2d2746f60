# Estimating a modified Kneser-Ney model with a single sort of the N-grams,
# then scoring held-out text.
#
# Run: python demos/03_estimate_and_score.py [workdir]

# %%
import math
import os
import sys
import tempfile

from synthetic import sentences

from ngramkit.estimation import build_model_index, estimate, write_arpa
from ngramkit.scoring import perplexity, score_sentence

work = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="ngramkit-demo-")
train = sentences(50_000, seed=0)
held = sentences(2_000, seed=1)

# %% A small RAM budget forces several counting blocks; the model does not change.
res = estimate(train, order=5, ram_budget=2 << 20)
print(f"{len(res.counting.files)} counting blocks, {res.model.num_grams()} grams")
for phase, sec in res.timings.items():
    print(f"  {phase:10} {sec:6.2f} s")

# Only full-order records ever reach the disk.
for (tag, n), recs in sorted(res.io.records_written.items()):
    print(f"  wrote {recs:8d} order-{n} records as '{tag}'")

d = res.adjusting.discounts.D
for n in range(1, 6):
    print(f"  D_{n} = {d[n, 1]:.3f} {d[n, 2]:.3f} {d[n, 3]:.3f}")

# %% Scoring keeps a small state so each word costs one trie descent.
line = max(held[:50], key=len)
toks = line.split()
lp = score_sentence(res.index, toks)
print(line)
print(" ".join(f"{x:.2f}" for x in lp))
print(f"held-out perplexity {perplexity(res.index, held).perplexity:.2f}")

# %% Quantization and remapping trade a little accuracy or speed for space.
for q, k in [(None, 0), (8, 0), (8, 2), (4, 2)]:
    idx = build_model_index(res.model, q, k)
    pp = perplexity(idx, held).perplexity
    print(f"q={str(q):4} k={k}: {idx.size_bytes() / res.model.num_grams():5.2f} bytes/gram, "
          f"perplexity {pp:.3f}")

# %% ARPA text for other toolkits.
path = os.path.join(work, "model.arpa")
write_arpa(res.model, path)
print(f"wrote {path} ({os.path.getsize(path) / 2**20:.1f} MB)")
assert math.isfinite(lp.sum())
