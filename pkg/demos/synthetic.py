"""Phrase-pool Zipf text used by the demos."""

import numpy as np


def sentences(n_lines, vocab=5000, s=1.1, phrases=20000, seed=0):
    rng = np.random.default_rng(seed)
    p = 1.0 / np.arange(1, vocab + 1) ** s
    p /= p.sum()
    names = np.array([f"w{t}" for t in range(vocab)], dtype=object)
    plen = rng.integers(2, 7, size=phrases)
    ptok = rng.choice(vocab, size=int(plen.sum()), p=p)
    pool = np.array([" ".join(x) for x in np.split(names[ptok], np.cumsum(plen)[:-1])],
                    dtype=object)
    q = 1.0 / np.arange(1, phrases + 1)
    q /= q.sum()
    units = rng.integers(1, 6, size=n_lines)
    T = int(units.sum())
    text = names[rng.choice(vocab, size=T, p=p)]
    is_phrase = rng.random(T) < 0.5
    text[is_phrase] = pool[rng.choice(phrases, size=int(is_phrase.sum()), p=q)]
    return [" ".join(x) for x in np.split(text, np.cumsum(units)[:-1])]
