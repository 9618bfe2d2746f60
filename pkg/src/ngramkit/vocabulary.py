"""Token <-> identifier mapping backed by a minimal perfect hash."""

from __future__ import annotations

import io
import struct
from collections import Counter
from typing import Iterable, Mapping

import numpy as np
from numba import njit

from ._bits import NJ, murmur64
from .errors import BuildError
from .mph import MinimalPerfectHash, fingerprint_many, mph_eval_hash, pack_keys

UNK = "<unk>"
FP_SEED = 0x5EED_F00D


@njit(**NJ)
def _lookup_many(g, samples, r, n, seed, fp_seed, slot_id, fps, buf, offs):
    m = offs.shape[0] - 1
    out = np.empty(m, np.int64)
    for i in range(m):
        st = offs[i]
        ln = offs[i + 1] - st
        s = mph_eval_hash(g, samples, r, n, murmur64(buf, st, ln, seed))
        if fps[s] == murmur64(buf, st, ln, fp_seed):
            out[i] = slot_id[s]
        else:
            out[i] = -1
    return out


class Vocabulary:
    """Identifiers ordered by decreasing occurrence, ties broken lexicographically."""

    def __init__(self, tokens: list[str], mph: MinimalPerfectHash, slot_id: np.ndarray,
                 fingerprints: np.ndarray, fp_seed: int = FP_SEED):
        self.tokens = tokens
        self.mph = mph
        self.slot_id = slot_id
        self.fingerprints = fingerprints
        self.fp_seed = fp_seed

    @property
    def V(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def unk_id(self) -> int:
        return self.lookup(UNK)

    @classmethod
    def build(cls, occurrences: Mapping[str, int] | Iterable[tuple[str, int]],
              seed: int = 0, fp_seed: int = FP_SEED, add_unk: bool = True) -> "Vocabulary":
        items = list(occurrences.items() if isinstance(occurrences, Mapping) else occurrences)
        if not items:
            raise BuildError("empty vocabulary")
        if len({t for t, _ in items}) != len(items):
            raise BuildError("duplicate tokens in vocabulary input")
        items.sort(key=lambda tc: (-int(tc[1]), tc[0].encode("utf-8")))
        tokens = [t for t, _ in items]
        if add_unk and UNK not in tokens:
            tokens.append(UNK)
        return cls.from_ordered(tokens, seed, fp_seed)

    @classmethod
    def from_ordered(cls, tokens: list[str], seed: int = 0, fp_seed: int = FP_SEED) -> "Vocabulary":
        """Use the given order as the id assignment."""
        buf, offs = pack_keys(tokens)
        mph = MinimalPerfectHash.build_packed(buf, offs, seed)
        slots = mph.eval_packed(buf, offs)
        slot_id = np.empty(len(tokens), np.uint32)
        slot_id[slots] = np.arange(len(tokens), dtype=np.uint32)
        fps = np.empty(len(tokens), np.uint64)
        fps[slots] = fingerprint_many(buf, offs, np.uint64(fp_seed))
        return cls(list(tokens), mph, slot_id, fps, fp_seed)

    @classmethod
    def from_corpus(cls, lines: Iterable[str], **kw) -> "Vocabulary":
        c: Counter = Counter()
        for line in lines:
            c.update(line.split())
        return cls.build(c, **kw)

    def lookup(self, token: str) -> int | None:
        i = int(self.lookup_many([token])[0])
        return None if i < 0 else i

    def __getitem__(self, token: str) -> int:
        i = self.lookup(token)
        if i is None:
            raise KeyError(token)
        return i

    def __contains__(self, token: str) -> bool:
        return self.lookup(token) is not None

    def token(self, i: int) -> str:
        return self.tokens[i]

    def lookup_many(self, tokens) -> np.ndarray:
        """Ids for a batch of tokens; -1 where absent."""
        if not len(tokens):
            return np.zeros(0, np.int64)
        buf, offs = pack_keys(tokens)
        return self.lookup_packed(buf, offs)

    def lookup_packed(self, buf, offs) -> np.ndarray:
        m = self.mph
        return _lookup_many(m.g, m.samples, m.r, m.n, np.uint64(m.seed), np.uint64(self.fp_seed),
                            self.slot_id, self.fingerprints, buf, offs)

    def encode(self, tokens, unk: bool = True) -> np.ndarray:
        ids = self.lookup_many(tokens)
        if unk:
            ids[ids < 0] = self.unk_id if UNK in self.tokens else -1
        return ids

    def size_bits(self) -> int:
        return self.mph.size_bits() + 32 * len(self.slot_id) + 64 * len(self.fingerprints)

    def serialize(self) -> bytes:
        out = io.BytesIO()
        out.write(b"VOCB" + struct.pack("<HQQ", 1, self.V, self.fp_seed))
        mph = self.mph.serialize()
        out.write(struct.pack("<Q", len(mph)))
        out.write(mph)
        out.write(self.slot_id.astype("<u4").tobytes())
        out.write(self.fingerprints.astype("<u8").tobytes())
        for t in self.tokens:
            b = t.encode("utf-8")
            out.write(struct.pack("<I", len(b)))
            out.write(b)
        return out.getvalue()

    @classmethod
    def deserialize(cls, data: bytes, offset: int = 0) -> tuple["Vocabulary", int]:
        if data[offset:offset + 4] != b"VOCB":
            raise BuildError("bad vocabulary magic")
        _, V, fp_seed = struct.unpack_from("<HQQ", data, offset + 4)
        p = offset + 22
        (nm,) = struct.unpack_from("<Q", data, p)
        mph, _ = MinimalPerfectHash.deserialize(data, p + 8)
        p += 8 + nm
        slot_id = np.frombuffer(data, "<u4", V, p).astype(np.uint32)
        p += 4 * V
        fps = np.frombuffer(data, "<u8", V, p).astype(np.uint64)
        p += 8 * V
        tokens = []
        for _ in range(V):
            (ln,) = struct.unpack_from("<I", data, p)
            tokens.append(data[p + 4:p + 4 + ln].decode("utf-8"))
            p += 4 + ln
        return cls(tokens, mph, slot_id, fps, fp_seed), p
