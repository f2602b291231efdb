"""Command-line front end: ``emlz reverse|parse|decode|verify|bench``."""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .config import TMPDIR_ENV, Config, parse_size
from .core import DecodeError, Parsing, decode
from .emio import IoError, ParseFormatError, TilingError, read_parse, reverse_text
from .index import ConfigError
from .parser import ParseInvariantError
from .pipeline import parse_file

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_FORMAT, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3, 4, 5


# ---------------------------------------------------------------- verification


@njit(cache=True)
def _first_bad_source(x, src, length):
    pos = 0
    for k in range(src.shape[0]):
        l = length[k]
        if l == 0:
            if x[pos] != src[k]:
                return k
            pos += 1
            continue
        p = src[k] - 1
        for t in range(l):
            if x[p + t] != x[pos + t]:
                return k
        pos += l
    return -1


@dataclass
class VerifyReport:
    ok: bool = True
    checks: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def fail(self, check: str, msg: str):
        self.ok = False
        self.checks[check] = "FAIL"
        self.failures.append(f"{check}: {msg}")

    def lines(self) -> list[str]:
        out = [f"{k}: {v}" for k, v in self.checks.items()]
        out += self.failures
        out.append("PASS" if self.ok else "FAIL")
        return out


def verify_parse(text: bytes, parsing: Parsing, samples: int = 200, seed: int = 0) -> VerifyReport:
    """Round trip, tiling, source equality and sampled greedy maximality."""
    rep = VerifyReport()
    n = len(text)
    x = np.frombuffer(text, dtype=np.uint8)
    if parsing.text_length() != n or np.any(parsing.length < 0):
        rep.fail("tiling", f"phrases cover {parsing.text_length()} symbols, text has {n}")
        return rep
    starts = parsing.starts()
    bad = np.flatnonzero((parsing.length > 0) & ((parsing.src < 1) | (parsing.src >= starts)))
    if bad.size:
        rep.fail("tiling", f"phrase {int(bad[0])} has a source that does not precede it")
        return rep
    rep.checks["tiling"] = "ok"
    k = _first_bad_source(x, parsing.src, parsing.length)
    if k >= 0:
        rep.fail("sources", f"phrase {k} does not match its source")
    else:
        rep.checks["sources"] = "ok"
    try:
        same = decode(parsing, n) == text
    except DecodeError as e:
        same = False
    if same:
        rep.checks["round_trip"] = "ok"
    else:
        rep.fail("round_trip", "decoded text differs from input")
    rng = np.random.default_rng(seed)
    z = parsing.z
    pick = np.arange(z) if z <= samples else np.sort(rng.choice(z, samples, replace=False))
    for k in pick.tolist():
        i = int(starts[k]) - 1
        l = int(parsing.length[k])
        if i + l >= n:
            continue  # reaches the end of the text
        pat = text[i:i + l + 1]
        if text.find(pat, 0, i + l) >= 0:
            rep.fail("maximality", f"phrase {k} at {i + 1} extends to length {l + 1}")
            break
    else:
        rep.checks["maximality"] = f"ok ({len(pick)} sampled)"
    return rep


# ---------------------------------------------------------------- commands


def _config(args) -> Config:
    return Config(mem=args.mem, mode=args.mode, block=args.block, buffer=args.buffer,
                  skip_threshold=args.skip_threshold, skip=not args.no_skip,
                  keep_temp=args.keep_temp, tmpdir=os.environ.get(TMPDIR_ENV))


def _dump(path: Optional[str], obj):
    if path:
        with open(path, "w") as f:
            json.dump(obj, f, indent=2)


def cmd_reverse(args) -> int:
    out = args.output or args.input + ".rev"
    n = reverse_text(args.input, out)
    print(f"reversed {n} bytes -> {out}")
    return EXIT_OK


def cmd_parse(args) -> int:
    cfg = _config(args)
    out = args.output or args.input + ".lz"
    stats = parse_file(args.input, out, cfg)
    io = stats.as_dict()["io_per_symbol"]
    print(f"n={stats.n} z={stats.z} n/z={stats.avg_phrase:.2f} b={stats.block_size} "
          f"blocks={stats.blocks} time={stats.seconds:.2f}s")
    print("io bytes/symbol: " + " ".join(f"{k}={v:.3f}" for k, v in sorted(io.items())))
    _dump(args.stats_json, {"config": cfg.as_dict(), "stats": stats.as_dict()})
    return EXIT_OK


def cmd_decode(args) -> int:
    parsing, n = read_parse(args.lzfile, with_n=True)
    data = decode(parsing, n)
    out = args.output or (args.lzfile[:-3] if args.lzfile.endswith(".lz") else args.lzfile) + ".out"
    with open(out, "wb") as f:
        f.write(data)
    print(f"decoded {len(data)} bytes -> {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    with open(args.input, "rb") as f:
        text = f.read()
    try:
        parsing, n = read_parse(args.lzfile, with_n=True)
    except TilingError as e:
        print(f"tiling: FAIL\n{e}\nFAIL")
        return EXIT_FAIL
    rep = verify_parse(text, parsing, args.samples, args.seed)
    if n != len(text):
        rep.fail("header", f"header n={n}, input has {len(text)} bytes")
    print("\n".join(rep.lines()))
    _dump(args.stats_json, {"ok": rep.ok, "checks": rep.checks, "failures": rep.failures})
    return EXIT_OK if rep.ok else EXIT_FAIL


def _sizes(text: str, n: int) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        out.append(int(float(tok) * n) if "." in tok and not tok[-1].isalpha() else parse_size(tok))
    return out


def cmd_bench(args) -> int:
    n = os.path.getsize(args.input)
    prefixes = _sizes(args.prefix, n)
    mems = [parse_size(m) for m in args.mem_grid.split(",")]
    wd = tempfile.mkdtemp(prefix="emlz-bench-", dir=os.environ.get(TMPDIR_ENV))
    rows = []
    try:
        for m in prefixes:
            m = min(m, n)
            pfx = os.path.join(wd, f"prefix{m}")
            with open(args.input, "rb") as fi, open(pfx, "wb") as fo:
                fo.write(fi.read(m))
            for mem in mems:
                cfg = Config(mem=mem, mode=args.mode, buffer=args.buffer,
                             skip_threshold=args.skip_threshold, skip=not args.no_skip, tmpdir=wd)
                st = parse_file(pfx, pfx + ".lz", cfg)
                io = st.as_dict()["io_per_symbol"]
                rows.append({"prefix": m, "mem": mem, "block": st.block_size, "blocks": st.blocks,
                             "us_per_symbol": st.seconds * 1e6 / max(m, 1),
                             "io_per_symbol": sum(v for k, v in io.items() if not k.endswith("reverse")),
                             "text_scan_per_symbol": io.get("read_text_scan", 0.0),
                             "z": st.z, "n_over_z": st.avg_phrase, "seconds": st.seconds})
                os.remove(pfx + ".lz")
    finally:
        shutil.rmtree(wd, ignore_errors=True)
    hdr = f"{'prefix':>12} {'mem':>12} {'blocks':>6} {'us/sym':>9} {'io B/sym':>9} {'z':>10} {'n/z':>9}"
    print(hdr)
    for r in rows:
        print(f"{r['prefix']:>12} {r['mem']:>12} {r['blocks']:>6} {r['us_per_symbol']:>9.3f} "
              f"{r['io_per_symbol']:>9.3f} {r['z']:>10} {r['n_over_z']:>9.2f}")
    _dump(args.stats_json, rows)
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing


def _add_run_flags(p, mem_default: str = "1G"):
    p.add_argument("--mode", type=int, choices=(32, 40), default=40, help="integer width in bits")
    p.add_argument("--buffer", default="256K", help="backward scan buffer size")
    p.add_argument("--skip-threshold", type=int, default=40, help="min phrase length kept for skipping")
    p.add_argument("--no-skip", action="store_true", help="disable the skipping trick")
    p.add_argument("--stats-json", metavar="PATH", help="write machine-readable stats")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="emlz", description="External-memory LZ77 factorization.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reverse", help="write the byte-reversed copy of a file")
    p.add_argument("input")
    p.add_argument("output", nargs="?")
    p.set_defaults(func=cmd_reverse)

    p = sub.add_parser("parse", help="factorize a file")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="output path (default INPUT.lz)")
    p.add_argument("--mem", default="1G", help="memory budget, e.g. 64M")
    p.add_argument("--block", default=None, help="block size override")
    p.add_argument("--keep-temp", action="store_true", help="keep the skip log")
    _add_run_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("decode", help="rebuild the text from a parse")
    p.add_argument("lzfile")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("verify", help="check a parse against its input")
    p.add_argument("input")
    p.add_argument("lzfile")
    p.add_argument("--samples", type=int, default=200, help="phrases checked for maximality")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stats-json", metavar="PATH")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time and I/O over prefixes and memory budgets")
    p.add_argument("input")
    p.add_argument("--prefix", default="0.25,0.5,1.0", help="prefix lengths: fractions or sizes")
    p.add_argument("--mem", dest="mem_grid", default="64M", help="comma-separated memory budgets")
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseFormatError, DecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except (IoError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ParseInvariantError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
