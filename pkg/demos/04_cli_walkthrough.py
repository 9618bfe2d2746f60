# The command-line tool end to end, driven from Python with subprocess.
#
# Run: python demos/04_cli_walkthrough.py

import json
import os
import subprocess
import sys
import tempfile

from synthetic import sentences

work = tempfile.mkdtemp(prefix="ngramkit-cli-")
corpus = os.path.join(work, "corpus.txt")
with open(corpus, "w") as fh:
    fh.write("\n".join(sentences(20_000)) + "\n")


def ngk(*args, stdin=None):
    cmd = [sys.executable, "-m", "ngramkit", *map(str, args)]
    print("$ ngramkit", " ".join(map(str, args)))
    out = subprocess.run(cmd, input=stdin, capture_output=True, text=True, check=True).stdout
    return out


model = os.path.join(work, "m.trie")
ngk("estimate", "--order", 5, "--ram", "64M", corpus, "-o", model)
print(ngk("perplexity", "--index", model, "--input", corpus))

prefix = os.path.join(work, "counts")
ngk("count", "--order", 4, corpus, "-o", os.path.join(work, "blocks"), "--counts-prefix", prefix)
files = [f"{prefix}.{n}.txt" for n in (1, 2, 3, 4)]
for k in (0, 2):
    ngk("build-trie", "--remap", k, *files, "-o", os.path.join(work, f"c{k}.trie"))
    st = json.loads(ngk("stats", "--index", os.path.join(work, f"c{k}.trie")))
    print(f"  remap {k}: {st['total_id_bits']} id bits, {st['bytes_per_gram']:.2f} bytes/gram")
ngk("build-hash", *files, "-o", os.path.join(work, "c.hash"))

queries = "w0 w1\nw3 w0 w2\nw1 w0 w0 w0\nnot a gram\n"
for idx in ("c0.trie", "c2.trie", "c.hash"):
    print(ngk("lookup", "--index", os.path.join(work, idx), stdin=queries), end="")
