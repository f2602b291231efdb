"""Acceptance criteria, each printed as a PASS/FAIL line in the terminal summary."""

import json
import math
import os
import time
import tracemalloc

import numpy as np
import pytest

from conftest import phrase_src_ok, write
from test_index import naive_lcp, naive_sa
from test_longphrase import ends_of
from test_ms import restricted_ms, run_scan
from emlz.cli import EXIT_OK, main
from emlz.config import Config
from emlz.core import lpf_brute, lz77_brute
from emlz.corpora import cere_like, de_bruijn, fuzz_text, mutated_repeat, random_text
from emlz.index import build_block_index, lcp_array, suffix_array
from emlz.longphrase import CandidateSet, extend_candidates, find_occurrences, resolve_long_phrase
from emlz.ms import finalize_inversion
from emlz.pipeline import parse_bytes, parse_file

MIB = 1 << 20
BIG = 64 * MIB


def oracle_texts(count: int, seed: int = 0):
    """Random and structured texts, n <= 5000, over alphabets 1, 2, 4 and 256."""
    rng = np.random.default_rng(seed)
    kinds = ["random", "equal", "debruijn", "repeat", "fuzz"]
    for i in range(count):
        kind = kinds[i % len(kinds)]
        sigma = int(rng.choice([1, 2, 4, 256]))
        n = int(rng.integers(1, 5001)) if rng.random() < 0.3 else int(rng.integers(1, 600))
        if kind == "random":
            x = random_text(n, sigma, int(rng.integers(1 << 30)))
        elif kind == "equal":
            x = np.full(n, int(rng.integers(256)), dtype=np.uint8)
        elif kind == "debruijn":
            s = max(2, min(sigma, 4))
            k = int(rng.integers(2, 7 if s == 2 else 5))
            x = de_bruijn(s, k)
            x = np.concatenate([x, x[: int(rng.integers(0, x.size))]])[:5000]
        elif kind == "repeat":
            x = mutated_repeat(n, int(rng.integers(1, 300)), sigma, int(rng.integers(0, 8)),
                               int(rng.integers(1 << 30)))
        else:
            x = fuzz_text(n, int(rng.integers(1 << 30)))
        yield kind, x.tobytes()


def test_c1_oracle_equivalence(report):
    count = mismatches = over = parses = 0
    for kind, x in oracle_texts(2000):
        ref = lz77_brute(x)
        for b in (16, 64, 256, max(16, len(x))):
            p, st = parse_bytes(x, Config(block=b, buffer=1024))
            parses += 1
            if p.length.tolist() != ref.length.tolist() or not phrase_src_ok(x, p):
                mismatches += 1
            if st.parsed_positions > 2 * len(x):
                over += 1
        count += 1
    assert report("C1 oracle equivalence", mismatches == 0,
                  f"{count} texts x 4 block sizes = {parses} parses, {mismatches} mismatches")
    assert report("C8a parsed positions <= 2n (C1 inputs)", over == 0, f"{over} runs over the bound")


def fuzz_sizes(count: int, rng):
    sizes = np.exp(rng.uniform(math.log(1024), math.log(3 * MIB), count - 1)).astype(int).tolist()
    return sizes + [50 * MIB]


def test_c2_round_trip_cli(report, tmp_path):
    rng = np.random.default_rng(2)
    bad, min_blocks, min_run, over, handoffs = [], None, None, 0, 0
    for i, n in enumerate(fuzz_sizes(100, rng)):
        x = fuzz_text(n, 1000 + i).tobytes()
        inp = write(tmp_path / f"f{i}", x)
        mem = 29 * -(-n // 8)
        js = str(tmp_path / "s.json")
        rc = main(["parse", inp, "--mem", str(mem), "--stats-json", js])
        rc2 = main(["decode", inp + ".lz", "-o", str(tmp_path / "out")])
        st = json.load(open(js))["stats"]
        planned = -(-n // st["block_size"])  # blocks the budget forces; handoffs may jump some
        min_blocks = planned if min_blocks is None else min(min_blocks, planned)
        min_run = st["blocks"] if min_run is None else min(min_run, st["blocks"])
        handoffs += st["handoffs"]
        over += st["parsed_positions"] > 2 * n
        if rc != EXIT_OK or rc2 != EXIT_OK or (tmp_path / "out").read_bytes() != x:
            bad.append(i)
        for p in (inp, inp + ".lz", inp + ".rev", str(tmp_path / "out")):
            if os.path.exists(p):
                os.remove(p)
    assert report("C2 round trip", not bad and min_blocks >= 8,
                  f"100 files up to 50 MiB, min ceil(n/b) {min_blocks}, min blocks run {min_run}, "
                  f"{handoffs} long-phrase handoffs, failures {bad}")
    assert report("C8a parsed positions <= 2n (C2 inputs)", over == 0, f"{over} runs over the bound")


def test_c3_invariance(report):
    texts = [fuzz_text(200_000, 7).tobytes(), cere_like(300_000, unit=40_000, rate=1e-3, seed=3).tobytes(),
             random_text(100_000, 4, 5).tobytes(), (b"ab" * 30_000) + random_text(1000, 256, 1).tobytes()]
    diffs = {"block size": 0, "skip": 0, "mode": 0}
    for x in texts:
        ref = lz77_brute(x).length.tolist()
        base = parse_bytes(x, Config(block=len(x)))[0].length.tolist()
        diffs["block size"] += base != ref
        for b in (4096, 20_000, 77_777):
            runs = {(m, s): parse_bytes(x, Config(block=b, mode=m, skip=s))[0]
                    for m in (32, 40) for s in (True, False)}
            diffs["block size"] += runs[(40, True)].length.tolist() != base
            for m in (32, 40):
                diffs["skip"] += runs[(m, True)].length.tolist() != runs[(m, False)].length.tolist()
            for s in (True, False):
                diffs["mode"] += runs[(32, s)].length.tolist() != runs[(40, s)].length.tolist()
            diffs["block size"] += not all(phrase_src_ok(x, p) for p in runs.values())
    assert report("C3 invariance", not any(diffs.values()), f"differences {diffs} over {len(texts)} texts")


def test_c4_sub_oracles(report):
    rng = np.random.default_rng(4)
    fails = {"sa/lcp": 0, "lpf_of_block": 0, "finalize_inversion": 0, "long phrase": 0}
    N = 1000
    for i in range(N):
        sigma = int(rng.choice([1, 2, 4, 256]))
        x = random_text(int(rng.integers(1, 300)), sigma, i) if i % 2 else \
            mutated_repeat(int(rng.integers(1, 300)), int(rng.integers(1, 20)), sigma, 2, i)
        xb = x.tobytes()
        sa = suffix_array(x)
        ref = naive_sa(xb)
        fails["sa/lcp"] += sa.tolist() != ref or lcp_array(x, sa).tolist() != naive_lcp(xb, ref)
        got = build_block_index(xb).lpf_b
        fails["lpf_of_block"] += [e.len for e in got] != [e.len for e in lpf_brute(xb)] or any(
            e.len and xb[e.src - 1:e.src - 1 + e.len] != xb[j:j + e.len] for j, e in enumerate(got))
        if len(xb) >= 2:
            s = int(rng.integers(1, len(xb)))
            b = int(rng.integers(1, len(xb) - s + 1))
            idx, inv, _ = run_scan(xb, s, b, int(rng.choice([32, 40])), buffer=int(rng.integers(1, 20)))
            finalize_inversion(inv, idx)
            want = restricted_ms(xb, s, b)
            src = inv.sources()
            fails["finalize_inversion"] += inv.ev_len.tolist() != want or any(
                l and not (src[j] < s and xb[src[j]:src[j] + l] == xb[s + j:s + j + l]) for j, l in enumerate(want))
        # long phrase helpers
        j = int(rng.integers(0, len(xb)))
        pat = xb[j:j + int(rng.integers(1, 10))]
        limit = int(rng.integers(1, len(xb) + 2))
        ok = find_occurrences(pat, xb, limit, buffer=int(rng.integers(1, 64))).to_list() == ends_of(pat, xb, limit)
        ends = sorted(set(rng.integers(0, len(xb) + 1, 8).tolist()))
        cs = CandidateSet()
        cs.append(np.array(ends))
        ok &= extend_candidates(cs, pat, xb).to_list() == [e + len(pat) for e in ends if xb[e:e + len(pat)] == pat]
        cs.delete()
        if len(xb) >= 2:
            lpf = lpf_brute(xb)
            t = max(range(1, len(xb)), key=lambda k: lpf[k].len) if i % 3 == 0 else int(rng.integers(1, len(xb)))
            ell = lpf[t].len
            chunk = int(rng.integers(1, max(2, ell + 1)))
            res = resolve_long_phrase(t, chunk, xb, buffer=int(rng.integers(1, 64)))
            ok &= res.len == ell and (ell == 0 or (res.src < t and xb[res.src:res.src + ell] == xb[t:t + ell]))
        fails["long phrase"] += not ok
    assert report("C4 sub-oracles", not any(fails.values()), f"{N} instances each, failures {fails}")


def peak_block_memory(b: int, mode: int, tmp_path) -> int:
    x = np.concatenate([cere_like(4 * b, unit=b // 2, rate=1e-3, seed=1), random_text(2 * b, 4, 2),
                        random_text(2 * b, 256, 3)])
    inp = write(tmp_path / f"m{b}", x.tobytes())
    cfg = Config(mem=b * (29 if mode == 40 else 28), mode=mode, tmpdir=str(tmp_path))
    parse_file(inp, inp + ".lz", cfg)  # warm compilation and the reversed file
    tracemalloc.start()
    base = tracemalloc.get_traced_memory()[0]
    try:
        st = parse_file(inp, inp + ".lz", cfg)
        peak = tracemalloc.get_traced_memory()[1] - base
    finally:
        tracemalloc.stop()
    assert st.block_size == b and st.blocks >= 8
    return peak


def test_c5_memory_ceiling(report, tmp_path):
    lines, ok = [], True
    for b in (1 << 16, 1 << 20):
        p40 = peak_block_memory(b, 40, tmp_path)
        p32 = peak_block_memory(b, 32, tmp_path)
        ok &= p40 <= 29 * b + MIB and p32 <= 28 * b
        lines.append(f"b=2^{b.bit_length() - 1}: 40-bit {p40 / b:.2f}b, 32-bit {p32 / b:.2f}b")
    assert report("C5 memory ceiling", ok, "; ".join(lines) + " (limits 29b+1MiB, 28b)")


def scan_runs(accesses) -> list[list[int]]:
    """Offsets of reversed-file reads, split where the offset moves backwards."""
    runs, last = [], None
    for _, tag, off, k in accesses:
        if tag != "rev":
            continue
        if last is None or off < last:
            runs.append([])
        runs[-1].append(off)
        last = off + k
    return runs


@pytest.fixture(scope="module")
def random64(tmp_path_factory):
    d = tmp_path_factory.mktemp("random64")
    path = write(d / "random", random_text(BIG, 256, 64).tobytes())
    return path


def scan_config(n: int, d: int, tmpdir: str, **kw) -> Config:
    b = math.ceil(n / d * 1.01)  # slack keeps a restart tail from spilling into block d+1
    return Config(block=b, tmpdir=tmpdir, **kw)


random64_stats: dict = {}


def test_c6_io_law(report, random64, tmp_path):
    lines, ok = [], True
    for d in (4, 8, 16):
        cfg = scan_config(BIG, d, str(tmp_path), record_access=True)
        st = parse_file(random64, str(tmp_path / "r.lz"), cfg)
        got = st.io["read"]["text_scan"] / BIG
        want = (d + 1) / 2
        runs = scan_runs(st.accesses)
        # one forward run per block scan; later blocks start earlier in the reversed file
        seq = len(runs) == st.blocks - 1 and [r[0] for r in runs] == sorted((r[0] for r in runs), reverse=True)
        within = abs(got - want) <= 0.15 * want
        ok &= within and seq and st.blocks == d
        lines.append(f"d={d}: {got:.3f} vs {want:.2f} ({sum(map(len, runs))} scan reads in {len(runs)} forward runs, sequential={seq})")
        if d == 4:
            random64_stats["z"] = st.z
    assert report("C6 I/O law", ok, "; ".join(lines))


def test_c7_repetitive_corpus(report, random64, tmp_path):
    cere = write(tmp_path / "cere", cere_like(BIG, unit=MIB, rate=1e-4, seed=7).tobytes())
    runs = {}
    for skip in (True, False):
        cfg = scan_config(BIG, 4, str(tmp_path), skip=skip)
        runs[skip] = parse_file(cere, str(tmp_path / "c.lz"), cfg)
    if "z" not in random64_stats:
        random64_stats["z"] = parse_file(random64, str(tmp_path / "r.lz"), scan_config(BIG, 4, str(tmp_path))).z
    nz_cere = BIG / runs[True].z
    nz_rand = BIG / random64_stats["z"]
    ratio = nz_cere / nz_rand
    same = runs[True].z == runs[False].z
    ok = ratio >= 100 and runs[True].seconds < runs[False].seconds and same
    assert report("C7 repetitive corpus", ok,
                  f"n/z cere {nz_cere:.1f} vs random {nz_rand:.2f} (x{ratio:.0f}); "
                  f"time skip on {runs[True].seconds:.1f}s, off {runs[False].seconds:.1f}s "
                  f"({runs[True].skips} skips)")


def test_c8_long_phrase_rounds(report):
    rng = np.random.default_rng(8)
    worst, count, bad, over = 0.0, 0, 0, 0
    for i in range(40):
        unit = random_text(int(rng.integers(20, 400)), int(rng.choice([2, 4, 256])), i).tobytes()
        reps = int(rng.integers(3, 30))
        x = random_text(int(rng.integers(0, 200)), 256, 100 + i).tobytes() + unit * reps + \
            random_text(int(rng.integers(0, 300)), 256, 200 + i).tobytes()
        b = int(rng.choice([16, 32, 64, 128]))
        p, st = parse_bytes(x, Config(block=b))
        bad += p.length.tolist() != lz77_brute(x).length.tolist()
        over += st.parsed_positions > 2 * len(x)
        for t, ln, rounds in st.long_phrases:
            bound = -(-ln // (b // 2)) + 1
            count += 1
            bad += rounds > bound
            worst = max(worst, rounds / bound)
    ok = bad == 0 and over == 0 and count > 0
    assert report("C8b long-phrase rounds <= ceil(l/(b/2))+1", ok,
                  f"{count} long phrases, worst rounds/bound {worst:.2f}, parse mismatches or violations {bad}")
    assert report("C8a parsed positions <= 2n (long-tail inputs)", over == 0, f"{over} runs over the bound")
