"""Per-order minimal-perfect-hash tables with 64-bit fingerprints."""

from __future__ import annotations

import io
import struct

import numpy as np
from numba import njit

from ._bits import NJ, murmur64
from .errors import BuildError
from .mph import MinimalPerfectHash, fingerprint_many, mph_eval_hash
from .trie import _read_array, _write_array, unique_by_frequency
from .vocabulary import Vocabulary

MAGIC = b"MPHT"
FP_SEED = 0xF1A9E55
COUNTS, PROBS = 0, 1


def gram_keys(ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Little-endian 4-byte id concatenation per row: (buffer, offsets)."""
    ids = np.ascontiguousarray(np.asarray(ids, dtype="<u4").reshape(len(ids), -1))
    n = ids.shape[1]
    buf = np.concatenate([ids.view(np.uint8).ravel(), np.zeros(8, np.uint8)])
    offs = np.arange(len(ids) + 1, dtype=np.int64) * (4 * n)
    return buf, offs


@njit(**NJ)
def _probe(g, samples, r, n, seed, fp_seed, fps, buf, offs, valid):
    m = offs.shape[0] - 1
    out = np.empty(m, np.int64)
    for i in range(m):
        if not valid[i]:
            out[i] = -1
            continue
        st = offs[i]
        ln = offs[i + 1] - st
        s = mph_eval_hash(g, samples, r, n, murmur64(buf, st, ln, seed))
        out[i] = s if fps[s] == murmur64(buf, st, ln, fp_seed) else -1
    return out


class HashOrderTable:
    def __init__(self, n, mph, fingerprints, index, values, index2=None, values2=None):
        self.n = n
        self.mph = mph
        self.fingerprints = fingerprints
        self.index = index
        self.values = values
        self.index2 = index2
        self.values2 = values2

    def __len__(self) -> int:
        return len(self.fingerprints)

    def probe(self, ids: np.ndarray, valid: np.ndarray | None = None) -> np.ndarray:
        buf, offs = gram_keys(ids)
        if valid is None:
            valid = np.ones(len(ids), np.bool_)
        m = self.mph
        return _probe(m.g, m.samples, m.r, m.n, np.uint64(m.seed), np.uint64(FP_SEED),
                      self.fingerprints, buf, offs, valid)

    def size_bits(self) -> int:
        bits = self.mph.size_bits() + 64 * len(self.fingerprints) + 8 * self.index.nbytes
        bits += 8 * self.values.nbytes
        if self.index2 is not None:
            bits += 8 * (self.index2.nbytes + self.values2.nbytes)
        return bits


def _narrow(idx: np.ndarray) -> np.ndarray:
    top = int(idx.max()) if len(idx) else 0
    for dt in (np.uint8, np.uint16, np.uint32):
        if top <= np.iinfo(dt).max:
            return idx.astype(dt)
    return idx.astype(np.uint64)


class HashIndex:
    """One minimal perfect hash table per order."""

    def __init__(self, N: int, vocab: Vocabulary, tables: list, payload: int):
        self.N = N
        self.vocab = vocab
        self.tables = tables
        self.payload = payload

    @classmethod
    def build(cls, grams, payloads, vocab: Vocabulary, payload: str = "counts",
              seed: int = 0) -> "HashIndex":
        kind = COUNTS if payload == "counts" else PROBS
        tables = []
        for n, (g, pay) in enumerate(zip(grams, payloads), start=1):
            g = np.asarray(g, dtype=np.int64).reshape(-1, n)
            pay = np.asarray(pay)
            if len(g) == 0:
                raise BuildError(f"order {n}: no grams")
            order = np.lexsort(g.T[::-1])
            sg = g[order]
            dup = np.nonzero(np.all(sg[1:] == sg[:-1], axis=1))[0]
            if len(dup):
                toks = " ".join(vocab.token(int(i)) for i in sg[dup[0]])
                raise BuildError(f"order {n}: duplicate gram '{toks}'")
            buf, offs = gram_keys(g)
            mph = MinimalPerfectHash.build_packed(buf, offs, seed, checked=True)
            slots = mph.eval_packed(buf, offs)
            fps = np.empty(len(g), np.uint64)
            fps[slots] = fingerprint_many(buf, offs, np.uint64(FP_SEED))
            if kind == COUNTS:
                uniq, idx = unique_by_frequency(pay.astype(np.int64))
                index = np.empty(len(g), np.int64)
                index[slots] = idx
                tables.append(HashOrderTable(n, mph, fps, _narrow(index), uniq.astype(np.uint64)))
            else:
                pay = pay.reshape(len(g), -1)
                cols = []
                for c in range(pay.shape[1]):
                    uniq, idx = unique_by_frequency(pay[:, c].astype(np.float32))
                    index = np.empty(len(g), np.int64)
                    index[slots] = idx
                    cols.append((_narrow(index), uniq.astype(np.float32)))
                i2, v2 = cols[1] if len(cols) > 1 else (None, None)
                tables.append(HashOrderTable(n, mph, fps, cols[0][0], cols[0][1], i2, v2))
        return cls(len(tables), vocab, tables, kind)

    def lookup_ids(self, ids) -> np.ndarray:
        """Slot per id row of one order (rows of -1 ids are never probed)."""
        ids = np.atleast_2d(np.asarray(ids, dtype=np.int64))
        n = ids.shape[1]
        if not 1 <= n <= self.N:
            return np.full(len(ids), -1, np.int64)
        valid = np.all(ids >= 0, axis=1)
        safe = np.where(ids >= 0, ids, 0)
        return self.tables[n - 1].probe(safe, valid)

    def payload_at(self, n: int, slot: int):
        t = self.tables[n - 1]
        if self.payload == COUNTS:
            return int(t.values[t.index[slot]])
        b = float(t.values2[t.index2[slot]]) if t.index2 is not None else None
        return float(t.values[t.index[slot]]), b

    def lookup(self, gram):
        toks = gram.split() if isinstance(gram, str) else list(gram)
        ids = self.vocab.lookup_many(toks)
        if len(ids) == 0 or np.any(ids < 0) or len(ids) > self.N:
            return None
        slot = int(self.lookup_ids(ids.reshape(1, -1))[0])
        return None if slot < 0 else self.payload_at(len(ids), slot)

    def lookup_many(self, grams) -> list:
        return [self.lookup(g) for g in grams]

    def size_bytes(self) -> int:
        return len(self.serialize())

    def serialize(self) -> bytes:
        out = io.BytesIO()
        out.write(MAGIC + struct.pack("<HBB", 1, self.N, self.payload))
        vb = self.vocab.serialize()
        out.write(struct.pack("<Q", len(vb)))
        out.write(vb)
        for t in self.tables:
            mb = t.mph.serialize()
            out.write(struct.pack("<Q", len(mb)))
            out.write(mb)
            arrs = [t.fingerprints, t.index, t.values]
            if t.index2 is not None:
                arrs += [t.index2, t.values2]
            out.write(struct.pack("<B", len(arrs)))
            for a in arrs:
                _write_array(out, a)
        return out.getvalue()

    def save(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(self.serialize())

    @classmethod
    def deserialize(cls, data: bytes) -> "HashIndex":
        if data[:4] != MAGIC:
            raise BuildError("not a hash index file")
        _, N, kind = struct.unpack_from("<HBB", data, 4)
        (nv,) = struct.unpack_from("<Q", data, 8)
        vocab, p = Vocabulary.deserialize(data, 16)
        tables = []
        for n in range(1, N + 1):
            (nm,) = struct.unpack_from("<Q", data, p)
            mph, _ = MinimalPerfectHash.deserialize(data, p + 8)
            p += 8 + nm
            (na,) = struct.unpack_from("<B", data, p)
            p += 1
            arrs = []
            for _ in range(na):
                a, p = _read_array(data, p)
                arrs.append(a)
            fps, idx, vals = arrs[:3]
            i2 = _narrow(arrs[3]) if na > 3 else None
            v2 = arrs[4] if na > 3 else None
            tables.append(HashOrderTable(n, mph, fps, _narrow(idx), vals, i2, v2))
        return cls(N, vocab, tables, kind)

    @classmethod
    def load(cls, path: str) -> "HashIndex":
        with open(path, "rb") as fh:
            return cls.deserialize(fh.read())
