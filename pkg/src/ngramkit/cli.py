"""Command-line front end: ``ngramkit <command> [flags]``."""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field

from .blocks import IOCounter
from .corpus import count_ngrams, load_count_files, write_counts
from .errors import NgramKitError
from .estimation import FALLBACK_DISCOUNTS, EstimationConfig, counting_pass, estimate, write_arpa
from .hashindex import MAGIC as HASH_MAGIC
from .hashindex import HashIndex
from .scoring import perplexity
from .trie import MAGIC as TRIE_MAGIC
from .trie import PROBS, TrieIndex

_UNITS = {"": 1, "K": 1 << 10, "M": 1 << 20, "G": 1 << 30, "T": 1 << 40}


def parse_size(text: str) -> int:
    """'512M' -> bytes; K/M/G/T suffixes, optional trailing B."""
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([KMGT]?)B?\s*", text, re.IGNORECASE)
    if not m:
        raise argparse.ArgumentTypeError(f"bad size '{text}'")
    return int(float(m.group(1)) * _UNITS[m.group(2).upper()])


def _quant(text: str):
    if text.lower() in ("none", "off"):
        return None
    q = int(text)
    if not 2 <= q <= 32:
        raise argparse.ArgumentTypeError("quantization bits must be in [2, 32] or 'none'")
    return q


@dataclass
class RunConfig:
    command: str
    N: int = 5
    ram_budget: int = 1 << 30
    tmp_dir: str | None = None
    K: int = 1
    k: int = 0
    q: int | None = 8
    fc: str = "byte"
    block_sizes: tuple = (64, 128)
    paths: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not 1 <= self.N <= 8:
            raise ValueError("--order must be in [1, 8]")
        if not 0 <= self.k <= max(0, self.N - 2):
            raise ValueError(f"--remap must be in [0, {max(0, self.N - 2)}]")
        if self.q is not None and not 2 <= self.q <= 32:
            raise ValueError("--quant-bits must be in [2, 32]")


def _add_common(p, order=True, estimation=False, index=False):
    if order:
        p.add_argument("--order", "-N", type=int, default=5)
    if estimation:
        p.add_argument("--ram", type=parse_size, default=parse_size("1G"))
        p.add_argument("--tmp", default=None, help="scratch directory (default $NGRAM_TMPDIR)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--fc", choices=["off", "byte", "bit"], default="byte")
        p.add_argument("--bos-eos", action="store_true", help="wrap lines in <s> ... </s>")
    if index:
        p.add_argument("--remap", type=int, default=0)
        p.add_argument("--block-size-l2", type=int, default=64)
        p.add_argument("--block-size-rest", type=int, default=128)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ngramkit", description="Compressed n-gram indexes and "
                                 "Kneser-Ney estimation.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="count N-grams into context-sorted block files")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True, help="output directory for block files")
    p.add_argument("--counts-prefix", help="also write PREFIX.<n>.txt count files, n = 1..N")
    _add_common(p, estimation=True)

    p = sub.add_parser("estimate", help="estimate a Kneser-Ney model into a reversed trie")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--quant-bits", type=_quant, default=8)
    p.add_argument("--arpa", help="also write the model in ARPA text format")
    p.add_argument("--discount-fallback", action="store_true",
                   help="use D = (0.5, 1.0, 1.5) for orders with degenerate statistics")
    _add_common(p, estimation=True, index=True)

    for name, what in (("build-trie", "trie"), ("build-hash", "hash index")):
        p = sub.add_parser(name, help=f"build a {what} from gram<TAB>count files")
        p.add_argument("counts", nargs="+")
        p.add_argument("-o", "--out", required=True)
        if name == "build-trie":
            _add_common(p, order=False, index=True)
            p.add_argument("--count-encoding", choices=["cw", "ps-ef", "ps-pef"], default="cw")
        else:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("lookup", help="look up grams read from stdin")
    p.add_argument("--index", required=True)

    p = sub.add_parser("perplexity", help="perplexity of a corpus under an estimated model")
    p.add_argument("--index", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--exclude-oov", action="store_true", help="leave OOV words out of the mean")
    p.add_argument("--bos-eos", action="store_true")

    p = sub.add_parser("stats", help="size breakdown of an index")
    p.add_argument("--index", required=True)
    return ap


def load_index(path: str):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] == TRIE_MAGIC:
        return TrieIndex.deserialize(data)
    if data[:4] == HASH_MAGIC:
        return HashIndex.deserialize(data)
    raise ValueError(f"{path}: not an index file")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _tmp(args) -> str | None:
    return args.tmp or os.environ.get("NGRAM_TMPDIR") or None


def _config(args) -> RunConfig:
    cfg = RunConfig(args.command)
    cfg.N = getattr(args, "order", 5)
    cfg.ram_budget = getattr(args, "ram", cfg.ram_budget)
    cfg.tmp_dir = _tmp(args) if hasattr(args, "tmp") else None
    cfg.K = getattr(args, "threads", 1)
    cfg.k = getattr(args, "remap", 0)
    cfg.q = getattr(args, "quant_bits", 8)
    cfg.fc = getattr(args, "fc", "byte")
    if hasattr(args, "block_size_l2"):
        cfg.block_sizes = (args.block_size_l2, args.block_size_rest)
    return cfg


def cmd_count(args, cfg: RunConfig) -> None:
    os.makedirs(args.out, exist_ok=True)
    io_counter = IOCounter()
    res = counting_pass(args.corpus, cfg.N, cfg.ram_budget, args.out, fc=cfg.fc,
                        io_counter=io_counter, bos_eos=args.bos_eos, threads=cfg.K)
    if args.counts_prefix:
        for n, (g, c) in enumerate(count_ngrams(args.corpus, res.vocab, cfg.N, args.bos_eos), 1):
            write_counts(f"{args.counts_prefix}.{n}.txt", g, c, res.vocab)
    _emit({"files": [f.path for f in res.files], "records": sum(len(f) for f in res.files),
           "bytes": io_counter.total_bytes(), "tokens": res.tokens, "windows": res.windows,
           "vocabulary": res.vocab.V})


def cmd_estimate(args, cfg: RunConfig) -> None:
    ec = EstimationConfig(order=cfg.N, ram_budget=cfg.ram_budget, tmp_dir=cfg.tmp_dir,
                          threads=cfg.K, quant_bits=cfg.q, remap=cfg.k, fc=cfg.fc,
                          bos_eos=args.bos_eos, block_sizes=cfg.block_sizes,
                          discount_fallback=FALLBACK_DISCOUNTS if args.discount_fallback else None)
    res = estimate(args.corpus, ec)
    res.index.save(args.out)
    if args.arpa:
        write_arpa(res.model, args.arpa)
    _emit({"grams": [len(x) for x in res.model.labels], "bytes": os.path.getsize(args.out),
           "blocks": len(res.counting.files), "tmp_bytes": res.io.total_bytes(),
           "seconds": {k: round(v, 3) for k, v in res.timings.items()}})


def cmd_build_trie(args, cfg: RunConfig) -> None:
    vocab, grams, counts = load_count_files(args.counts)
    cfg.N = len(grams)
    cfg.validate()
    idx = TrieIndex.build(grams, counts, vocab, remap=cfg.k, count_encoding=args.count_encoding,
                          block_sizes=cfg.block_sizes)
    idx.save(args.out)
    _emit({"grams": [len(g) for g in grams], "bytes": os.path.getsize(args.out)})


def cmd_build_hash(args, cfg: RunConfig) -> None:
    vocab, grams, counts = load_count_files(args.counts)
    # unigrams absent from the files keep no slot
    idx = HashIndex.build(grams, counts, vocab, seed=args.seed)
    idx.save(args.out)
    _emit({"grams": [len(g) for g in grams], "bytes": os.path.getsize(args.out)})


def _fmt_payload(v) -> str:
    if v is None:
        return "NOT_FOUND"
    if isinstance(v, tuple):
        p, b = v
        return f"{p:.9g}" if b is None else f"{p:.9g}\t{b:.9g}"
    return str(v)


def cmd_lookup(args, cfg: RunConfig) -> None:
    idx = load_index(args.index)
    grams = [line.strip() for line in sys.stdin if line.strip()]
    N = idx.N
    out = []
    for g in grams:
        ok = 1 <= len(g.split()) <= N
        out.append(idx.lookup(g) if ok else None)
    for g, v in zip(grams, out):
        print(f"{g}\t{_fmt_payload(v)}")


def cmd_perplexity(args, cfg: RunConfig) -> None:
    idx = load_index(args.index)
    if not isinstance(idx, TrieIndex) or idx.payload != PROBS:
        raise ValueError("perplexity needs an index produced by 'estimate'")
    rep = perplexity(idx, args.input, include_oov=not args.exclude_oov, bos_eos=args.bos_eos)
    _emit(rep.as_dict())


def cmd_stats(args, cfg: RunConfig) -> None:
    idx = load_index(args.index)
    size = os.path.getsize(args.index)
    if isinstance(idx, TrieIndex):
        levels = []
        for n, ls in enumerate(idx.level_bits(), 1):
            levels.append({"n": n, "grams": int(idx.sizes[n - 1]), "ids_bits": ls.ids_bits,
                           "pointer_bits": ls.pointer_bits, "value_bits": ls.value_bits})
        grams = idx.num_grams()
        vbits = sum(l["value_bits"] for l in levels)
        info = {"kind": "trie", "order": idx.N, "remap": idx.k, "grams": grams, "bytes": size,
                "bytes_per_gram": size / max(grams, 1), "bytes_per_value": vbits / 8 / max(grams, 1),
                "total_id_bits": idx.total_id_bits(), "levels": levels}
    else:
        levels = [{"n": t.n, "grams": len(t), "bits": t.size_bits()} for t in idx.tables]
        grams = sum(l["grams"] for l in levels)
        info = {"kind": "hash", "order": idx.N, "grams": grams, "bytes": size,
                "bytes_per_gram": size / max(grams, 1), "levels": levels}
    _emit(info)


COMMANDS = {
    "count": cmd_count,
    "estimate": cmd_estimate,
    "build-trie": cmd_build_trie,
    "build-hash": cmd_build_hash,
    "lookup": cmd_lookup,
    "perplexity": cmd_perplexity,
    "stats": cmd_stats,
}


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    cfg = _config(args)
    try:
        if args.command in ("count", "estimate"):
            cfg.validate()
            if cfg.K < 1:
                raise ValueError("--threads must be at least 1")
        if args.command == "build-trie" and args.remap < 0:
            raise ValueError("--remap must be non-negative")
    except ValueError as e:
        try:
            ap.error(str(e))
        except SystemExit as ex:
            return int(ex.code)
    try:
        COMMANDS[args.command](args, cfg)
    except (NgramKitError, OSError, ValueError, KeyError) as e:
        print(f"ngramkit: error: {e}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(run())

