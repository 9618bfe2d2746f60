"""Minimal perfect hashing by 3-uniform hypergraph peeling.

Each key picks one vertex in each of three equal parts of a vertex set of
size ~1.23 n.  If the resulting hypergraph peels completely, every key owns a
distinct hinge vertex, selected at query time by ``(g[v0]+g[v1]+g[v2]) % 3``.
Ranking hinge vertices among used ones makes the map minimal.  ``g`` takes
two bits per vertex (3 marks an unused vertex), plus a 64-bit rank sample
every 128 vertices: about 3.1 bits per key in total.
"""

from __future__ import annotations

import io
import struct

import numpy as np
from numba import njit

from ._bits import NJ, U0, mix64, murmur64, popcount
from .errors import ConstructionError, SeedFailureError

GAMMA = 1.23
MAX_ATTEMPTS = 64
_GOLD = np.uint64(0x9E3779B97F4A7C15)
_LO = np.uint64(0x5555555555555555)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def pack_keys(keys) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate byte strings into (uint8 buffer, int64 offsets of length n+1)."""
    keys = [k.encode() if isinstance(k, str) else bytes(k) for k in keys]
    lens = np.fromiter((len(k) for k in keys), np.int64, len(keys))
    offs = np.zeros(len(keys) + 1, np.int64)
    np.cumsum(lens, out=offs[1:])
    buf = np.frombuffer(b"".join(keys) + b"\0" * 8, np.uint8)
    return buf, offs


@njit(**NJ)
def _hash_all(buf, offs, seed):
    n = offs.shape[0] - 1
    out = np.empty(n, np.uint64)
    for i in range(n):
        out[i] = murmur64(buf, offs[i], offs[i + 1] - offs[i], seed)
    return out


@njit(inline="always", **NJ)
def _vertex(h, j, r):
    x = mix64(h + np.uint64(j + 1) * _GOLD)
    return j * r + np.int64(((x >> _S32) * np.uint64(r)) >> _S32)


@njit(**NJ)
def _peel(hashes, r):
    """Return (edge order, hinge slot) or an empty order when peeling fails."""
    n = hashes.shape[0]
    nv = 3 * r
    edges = np.empty((n, 3), np.int64)
    deg = np.zeros(nv, np.int64)
    xr = np.zeros(nv, np.int64)
    for e in range(n):
        for j in range(3):
            v = _vertex(hashes[e], j, r)
            edges[e, j] = v
            deg[v] += 1
            xr[v] ^= e
    order = np.empty(n, np.int64)
    hinge = np.empty(n, np.int64)
    stack = np.empty(nv, np.int64)
    top = 0
    for v in range(nv):
        if deg[v] == 1:
            stack[top] = v
            top += 1
    done = 0
    while top > 0:
        top -= 1
        v = stack[top]
        if deg[v] != 1:
            continue
        e = xr[v]
        order[done] = e
        for j in range(3):
            if edges[e, j] == v:
                hinge[done] = j
        done += 1
        for j in range(3):
            w = edges[e, j]
            deg[w] -= 1
            xr[w] ^= e
            if deg[w] == 1:
                stack[top] = w
                top += 1
    if done < n:
        return order[:0], hinge[:0], edges
    return order, hinge, edges


@njit(inline="always", **NJ)
def _get2(g, v):
    return np.int64((g[v >> 5] >> np.uint64((v & 31) * 2)) & np.uint64(3))


@njit(**NJ)
def _assign(order, hinge, edges, nv):
    g = np.full((nv + 31) // 32 + 1, np.uint64(0xFFFFFFFFFFFFFFFF))
    for t in range(order.shape[0] - 1, -1, -1):
        e = order[t]
        j = hinge[t]
        s = 0
        for q in range(3):
            if q != j:
                s += _get2(g, edges[e, q])
        val = (j - s) % 3
        if val < 0:
            val += 3
        v = edges[e, j]
        sh = np.uint64((v & 31) * 2)
        g[v >> 5] &= ~(np.uint64(3) << sh)
        g[v >> 5] |= np.uint64(val) << sh
    return g


@njit(inline="always", **NJ)
def _unused(word):
    # one bit per 2-bit lane equal to 3
    return word & (word >> np.uint64(1)) & _LO


@njit(**NJ)
def _rank_samples(g, nv):
    nwords = (nv + 31) // 32
    samples = np.zeros(nwords // 4 + 2, np.uint64)
    used = 0
    for w in range(nwords):
        if w % 4 == 0:
            samples[w // 4] = np.uint64(used)
        lanes = min(32, nv - 32 * w)
        used += lanes - popcount(_unused(g[w]) & _lane_mask(lanes))
    samples[nwords // 4 + 1] = np.uint64(used)
    return samples


@njit(inline="always", **NJ)
def _lane_mask(lanes):
    if lanes >= 32:
        return _LO
    return _LO & ((np.uint64(1) << np.uint64(2 * lanes)) - np.uint64(1))


@njit(inline="always", **NJ)
def _rank(g, samples, v):
    w = v >> 5
    blk = w >> 2
    used = np.int64(samples[blk])
    for q in range(blk * 4, w):
        used += 32 - popcount(_unused(g[q]))
    lanes = v & 31
    if lanes:
        used += lanes - popcount(_unused(g[w]) & _lane_mask(lanes))
    return used


@njit(**NJ)
def mph_eval_hash(g, samples, r, n, h):
    v0 = _vertex(h, 0, r)
    v1 = _vertex(h, 1, r)
    v2 = _vertex(h, 2, r)
    j = (_get2(g, v0) + _get2(g, v1) + _get2(g, v2)) % 3
    v = v0
    if j == 1:
        v = v1
    elif j == 2:
        v = v2
    s = _rank(g, samples, v)
    if s >= n:
        s = n - 1
    return s


@njit(**NJ)
def mph_eval_many(g, samples, r, n, seed, buf, offs):
    m = offs.shape[0] - 1
    out = np.empty(m, np.int64)
    for i in range(m):
        h = murmur64(buf, offs[i], offs[i + 1] - offs[i], seed)
        out[i] = mph_eval_hash(g, samples, r, n, h)
    return out


class MinimalPerfectHash:
    """Bijection from a fixed key set onto [0, n)."""

    def __init__(self, n: int, r: int, seed: int, g: np.ndarray, samples: np.ndarray):
        self.n = n
        self.r = r
        self.seed = seed
        self.g = g
        self.samples = samples

    @classmethod
    def build(cls, keys, seed: int = 0) -> "MinimalPerfectHash":
        keys = [k.encode() if isinstance(k, str) else bytes(k) for k in keys]
        if not keys:
            raise ConstructionError("cannot build a perfect hash over an empty key set")
        if len(set(keys)) != len(keys):
            raise ConstructionError("duplicate keys")
        buf, offs = pack_keys(keys)
        return cls.build_packed(buf, offs, seed, checked=True)

    @classmethod
    def build_packed(cls, buf, offs, seed: int = 0, checked: bool = False,
                     max_attempts: int = MAX_ATTEMPTS) -> "MinimalPerfectHash":
        n = len(offs) - 1
        if n <= 0:
            raise ConstructionError("cannot build a perfect hash over an empty key set")
        r = max(2, int(np.ceil(GAMMA * n / 3)))
        if not checked:
            _reject_duplicates(buf, offs)
        for attempt in range(max_attempts):
            s = (seed + attempt * 0x9E3779B1) & 0xFFFFFFFFFFFFFFFF
            hashes = _hash_all(buf, offs, np.uint64(s))
            order, hinge, edges = _peel(hashes, r)
            if len(order) == n:
                g = _assign(order, hinge, edges, 3 * r)
                samples = _rank_samples(g, 3 * r)
                return cls(n, r, s, g, samples)
        raise SeedFailureError(f"peeling failed after {max_attempts} seeds for {n} keys")

    def __call__(self, key) -> int:
        buf, offs = pack_keys([key])
        return int(self.eval_packed(buf, offs)[0])

    def eval_packed(self, buf, offs) -> np.ndarray:
        return mph_eval_many(self.g, self.samples, self.r, self.n, np.uint64(self.seed), buf, offs)

    def eval_many(self, keys) -> np.ndarray:
        buf, offs = pack_keys(keys)
        return self.eval_packed(buf, offs)

    def size_bits(self) -> int:
        return 64 * (len(self.g) + len(self.samples)) + 4 * 64

    def bits_per_key(self) -> float:
        return self.size_bits() / self.n

    def serialize(self) -> bytes:
        out = io.BytesIO()
        out.write(b"MPHF" + struct.pack("<QQQQQ", self.n, self.r, self.seed, len(self.g), len(self.samples)))
        out.write(self.g.astype("<u8").tobytes())
        out.write(self.samples.astype("<u8").tobytes())
        return out.getvalue()

    @classmethod
    def deserialize(cls, data: bytes, offset: int = 0) -> tuple["MinimalPerfectHash", int]:
        if data[offset:offset + 4] != b"MPHF":
            raise ConstructionError("bad MPH magic")
        n, r, seed, ng, ns = struct.unpack_from("<QQQQQ", data, offset + 4)
        p = offset + 44
        g = np.frombuffer(data, "<u8", ng, p).astype(np.uint64)
        p += 8 * ng
        samples = np.frombuffer(data, "<u8", ns, p).astype(np.uint64)
        p += 8 * ns
        return cls(n, r, seed, g, samples), p


def _reject_duplicates(buf, offs) -> None:
    h1 = _hash_all(buf, offs, np.uint64(0x1234567))
    h2 = _hash_all(buf, offs, np.uint64(0x7654321))
    order = np.lexsort((h2, h1))
    a, b = h1[order], h2[order]
    dup = np.nonzero((a[1:] == a[:-1]) & (b[1:] == b[:-1]))[0]
    for d in dup:
        i, j = order[d], order[d + 1]
        if bytes(buf[offs[i]:offs[i + 1]]) == bytes(buf[offs[j]:offs[j + 1]]):
            raise ConstructionError(f"duplicate key {bytes(buf[offs[i]:offs[i + 1]])!r}")


fingerprint_many = _hash_all
