import os
import tempfile

import numpy as np
from hypothesis import given, strategies as st

from conftest import texts
from emlz.core import MsEntry, lz77_brute
from emlz.emio import MemoryBackwardScanner, SkipPhraseLog
from emlz.index import BlockIndex, build_block_index, interval_by_binary_search
from emlz.ms import (InvertedMs, finalize_inversion, invert_entry, recompute_after_skip,
                     scan_prefix, trace_entries)


def ms_ab_b(x: bytes, s: int, b: int, q: int) -> int:
    """Longest prefix of X[q:] occurring in the block X[s:s+b]."""
    blk = x[s:s + b]
    l = 0
    while q + l < len(x) and x[q:q + l + 1] in blk:
        l += 1
    return l


def restricted_ms(x: bytes, s: int, b: int) -> list[int]:
    """For each block position, the longest match with a source starting before s."""
    out = []
    for j in range(s, s + b):
        best = 0
        for q in range(s):
            l = 0
            while j + l < s + b and x[q + l] == x[j + l]:
                l += 1
            best = max(best, l)
        out.append(best)
    return out


def run_scan(x: bytes, s: int, b: int, mode=40, buffer=7, reader=None, trace=True):
    idx = BlockIndex(x[s:s + b], s, mode)
    inv, stats = scan_prefix(idx, MemoryBackwardScanner(x, s, buffer), reader, trace=trace,
                             read_forward=lambda p, k: x[p:p + k])
    return idx, inv, stats


def check_sources(x, s, inv, lens):
    src = inv.sources()
    for j, l in enumerate(lens):
        if l:
            p = int(src[j])
            assert p < s and x[p:p + l] == x[s + j:s + j + l]


def test_first_block_emits_nothing():
    idx, inv, stats = run_scan(b"abc", 0, 3)
    assert stats.emitted == 0 and not inv.ev_len.any()


def test_scan_example_ba_ab():
    idx, inv, stats = run_scan(b"baab", 2, 2)
    assert trace_entries(stats, idx) == [MsEntry(2, 1, 1), MsEntry(1, 2, 1)]
    finalize_inversion(inv, idx)
    assert inv.entries() == [MsEntry(1, 2, 1), MsEntry(2, 1, 1)]


def test_no_shared_symbols_gives_zero():
    idx, inv, _ = run_scan(b"xyzxyzab", 6, 2)
    finalize_inversion(inv, idx)
    assert inv.ev_len.tolist() == [0, 0]


def test_invert_entry_by_hand():
    x = b"abaabab"
    idx = build_block_index(x[4:], 5)  # B = "bab", prefix "abaa"
    inv = InvertedMs.empty(3)
    invert_entry(inv, idx, MsEntry(4, 2, 2))  # "ab" at X position 4 is B[2..3]
    invert_entry(inv, idx, MsEntry(3, 2, 1))
    invert_entry(inv, idx, MsEntry(2, 1, 2), interval_by_binary_search(idx, b"ba"))
    invert_entry(inv, idx, MsEntry(1, 2, 2))
    invert_entry(inv, idx, MsEntry(1, None, 0))
    finalize_inversion(inv, idx)
    assert inv.ev_len.tolist() == [2, 2, 1] == restricted_ms(x, 4, 3)
    check_sources(x, 4, inv, [2, 2, 1])


def test_recompute_after_skip_examples():
    idx = build_block_index(b"abaab", 10)
    assert recompute_after_skip(idx, b"zz").empty
    iv = recompute_after_skip(idx, b"abax")
    assert iv == interval_by_binary_search(idx, b"aba") and iv.len == 3
    assert recompute_after_skip(idx, b"abaab" + b"q").len == 5
    # window refilled on demand
    chunks = iter([b"aab", b""])
    assert recompute_after_skip(idx, b"ab", lambda k: next(chunks)).len == 5


@given(texts(max_size=160).filter(lambda x: len(x) >= 2), st.data())
def test_finalize_matches_restricted_brute(x, data):
    s = data.draw(st.integers(1, len(x) - 1))
    b = data.draw(st.integers(1, len(x) - s))
    mode = data.draw(st.sampled_from([32, 40]))
    idx, inv, stats = run_scan(x, s, b, mode, buffer=data.draw(st.sampled_from([1, 3, 64])))
    entries = trace_entries(stats, idx)
    assert [e.pos for e in entries] == list(range(s, 0, -1))
    assert [e.len for e in entries] == [ms_ab_b(x, s, b, q) for q in range(s - 1, -1, -1)]
    finalize_inversion(inv, idx)
    want = restricted_ms(x, s, b)
    assert inv.ev_len.tolist() == want
    check_sources(x, s, inv, want)


def _log_path():
    fd, path = tempfile.mkstemp(suffix=".skips", dir=os.environ.get("EMLZ_TMPDIR"))
    os.close(fd)
    return path


def logged(x: bytes, s: int, threshold: int, path):
    """Skip log holding the greedy phrases of X[:s] with length >= threshold."""
    log = SkipPhraseLog(str(path), len(x), threshold, capacity=10 * len(x))
    pos = 0
    recs = []
    for ph in lz77_brute(x):
        if pos >= s:
            break
        if ph.len >= threshold and pos + ph.len <= s:
            log.append(pos + 1, ph.len)
            recs.append((pos, pos + ph.len))
        pos += ph.span
    return log, recs


@given(texts(max_size=220, alphabets=(1, 2, 4)).filter(lambda x: len(x) >= 8), st.data())
def test_skipping_emits_exactly_the_uncovered_positions(x, data):
    s = data.draw(st.integers(1, len(x) - 1))
    b = data.draw(st.integers(1, len(x) - s))
    threshold = data.draw(st.integers(2, 6))
    log, recs = logged(x, s, threshold, _log_path())
    idx, inv, stats = run_scan(x, s, b, buffer=data.draw(st.sampled_from([2, 5, 64])),
                               reader=log.reader())
    log.close(delete=True)
    got = [e.pos - 1 for e in trace_entries(stats, idx)]
    assert got == sorted(got, reverse=True) and len(set(got)) == len(got)

    def covered(j):
        for a, e in recs:
            if a <= j < e:
                return j + ms_ab_b(x, s, b, j) <= e
        return False

    assert got == [j for j in range(s - 1, -1, -1) if not covered(j)]
    finalize_inversion(inv, idx)
    want = restricted_ms(x, s, b)
    assert inv.ev_len.tolist() == want
    check_sources(x, s, inv, want)


def test_skipping_on_long_runs():
    x = b"ab" * 30 + b"a" * 200 + b"c" + b"a" * 64
    s = 262
    log, recs = logged(x, s, 40, _log_path())
    idx, inv, stats = run_scan(x, s, len(x) - s, buffer=16, reader=log.reader())
    log.close(delete=True)
    assert stats.skips > 0 and stats.skipped_positions > 100
    finalize_inversion(inv, idx)
    assert inv.ev_len.tolist() == restricted_ms(x, s, len(x) - s)
