"""Resolution of phrases longer than half a block.

The phrase X[t:] is matched chunk by chunk.  Round one finds every earlier
occurrence of the first chunk with a streaming two-way matcher (constant
space beyond the pattern).  Each later round streams the text forward once
and measures, for every surviving candidate, how far it agrees with the next
chunk; the candidates live on disk between rounds as 5-byte end positions.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from numba import njit

from .core import Phrase, as_u8
from .emio import SCAN_BUFFER, IoCounters, _pack40, _unpack40

CAND_RECORD = 5


class MemoryText:
    """Forward-readable text held in memory (same interface as ForwardText)."""

    def __init__(self, text, counters: Optional[IoCounters] = None):
        self.x = as_u8(text)
        self.n = self.x.shape[0]
        self.counters = counters

    def read_into(self, pos: int, out: np.ndarray, category: str = "long_phrase") -> int:
        k = out.shape[0]
        out[:] = self.x[pos:pos + k]
        if self.counters is not None:
            self.counters.add_read(category, k, "fwd", pos)
        return k

    def read(self, pos: int, k: int, category: str = "long_phrase") -> bytes:
        data = self.x[pos:pos + k].tobytes()
        if self.counters is not None:
            self.counters.add_read(category, len(data), "fwd", pos)
        return data


def _as_source(text, counters=None):
    return text if hasattr(text, "read_into") else MemoryText(text, counters)


# ---------------------------------------------------------------- candidates


class CandidateSet:
    """Strictly increasing end positions on disk, 5 bytes each.

    An end position is 1-based and inclusive, which is also the 0-based
    index just past the occurrence.
    """

    def __init__(self, path: Optional[str] = None, counters: Optional[IoCounters] = None):
        if path is None:
            fd, path = tempfile.mkstemp(suffix=".cand", dir=os.environ.get("EMLZ_TMPDIR"))
            os.close(fd)
        self.path = path
        self.counters = counters
        self.count = 0
        self.last = -1
        self._pending: list[np.ndarray] = []
        self._npending = 0
        self._f = open(path, "wb")

    def append(self, ends: np.ndarray):
        ends = np.asarray(ends, dtype=np.int64)
        if ends.size == 0:
            return
        if ends[0] <= self.last or (ends.size > 1 and np.any(np.diff(ends) <= 0)):
            raise ValueError("candidate ends must be strictly increasing")
        self.last = int(ends[-1])
        self._pending.append(ends.copy())
        self._npending += ends.size
        self.count += ends.size
        if self._npending * CAND_RECORD >= SCAN_BUFFER:
            self._flush()

    def _flush(self):
        if not self._pending:
            return
        data = _pack40(np.concatenate(self._pending)).tobytes()
        self._f.write(data)
        if self.counters is not None:
            self.counters.add_write("candidates", len(data))
        self._pending.clear()
        self._npending = 0

    def seal(self) -> "CandidateSet":
        if self._f is not None:
            self._flush()
            self._f.close()
            self._f = None
        return self

    def batches(self, k: int = SCAN_BUFFER // CAND_RECORD) -> Iterator[np.ndarray]:
        self.seal()
        with open(self.path, "rb") as f:
            while True:
                data = f.read(k * CAND_RECORD)
                if not data:
                    return
                if self.counters is not None:
                    self.counters.add_read("candidates", len(data))
                yield _unpack40(np.frombuffer(data, dtype=np.uint8).reshape(-1, CAND_RECORD))

    def to_list(self) -> list[int]:
        return [int(v) for b in self.batches() for v in b]

    def first(self) -> Optional[int]:
        for b in self.batches(1):
            return int(b[0])
        return None

    def __len__(self) -> int:
        return self.count

    def replace_with(self, other: "CandidateSet"):
        """Move ``other``'s records into this set's file."""
        other.seal()
        self.seal()
        os.replace(other.path, self.path)
        self.count, self.last = other.count, other.last

    def delete(self):
        self.seal()
        if os.path.exists(self.path):
            os.remove(self.path)


# ---------------------------------------------------------------- two-way matcher


@njit(cache=True)
def _max_suffix(x, reverse):
    m = x.shape[0]
    ms, j, k, p = -1, 0, 1, 1
    while j + k < m:
        a = x[j + k]
        b = x[ms + k]
        if (a > b) if reverse else (a < b):
            j += k
            k = 1
            p = j - ms
        elif a == b:
            if k != p:
                k += 1
            else:
                j += p
                k = 1
        else:
            ms = j
            j = ms + 1
            k = 1
            p = 1
    return ms, p


@njit(cache=True)
def _critical(x):
    """(ell, per, periodic) of the critical factorization of x."""
    m = x.shape[0]
    i, p = _max_suffix(x, False)
    j, q = _max_suffix(x, True)
    if i > j:
        ell, per = i, p
    else:
        ell, per = j, q
    periodic = per + ell + 1 <= m
    if periodic:
        for t in range(ell + 1):
            if x[t] != x[t + per]:
                periodic = False
                break
    if not periodic:
        per = max(ell + 1, m - ell - 1) + 1
    return ell, per, periodic


@njit(cache=True)
def _two_way(x, ell, per, periodic, y, base, end, state, stop, out, cap):
    """Occurrences of x with start j in [state[0], stop) inside y = X[base:end].

    ``state`` = (j, memory) is resumable across buffers.  Returns the number
    of starts written to ``out``; stops early when ``out`` holds ``cap``.
    """
    m = x.shape[0]
    j = state[0]
    memory = state[1]
    cnt = 0
    while j < stop and j + m <= end and cnt < cap:
        o = j - base
        if periodic:
            i = max(ell, memory) + 1
            while i < m and x[i] == y[o + i]:
                i += 1
            if i >= m:
                i = ell
                while i > memory and x[i] == y[o + i]:
                    i -= 1
                if i <= memory:
                    out[cnt] = j
                    cnt += 1
                j += per
                memory = m - per - 1
            else:
                j += i - ell
                memory = -1
        else:
            i = ell + 1
            while i < m and x[i] == y[o + i]:
                i += 1
            if i >= m:
                i = ell
                while i >= 0 and x[i] == y[o + i]:
                    i -= 1
                if i < 0:
                    out[cnt] = j
                    cnt += 1
                j += per
            else:
                j += i - ell
    state[0] = j
    state[1] = memory
    return cnt


@dataclass
class MatchStats:
    streamed: int = 0
    passes: int = 0


def _occurrences(src, pat: np.ndarray, stop: int, first: int = 0, sink=None,
                 buffer: int = SCAN_BUFFER, stats: Optional[MatchStats] = None) -> int:
    """Stream X forward; send 0-based starts j in [first, stop) of pat to sink."""
    m = pat.shape[0]
    n = src.n
    last_end = min(n, stop - 1 + m)
    if m == 0 or first >= stop or first + m > last_end:
        return 0
    ell, per, periodic = _critical(pat)
    w = m + buffer
    buf = np.empty(w, dtype=np.uint8)
    base, end = first, first
    state = np.array([first, -1], dtype=np.int64)
    out = np.empty(1 << 16, dtype=np.int64)
    total = 0
    while True:
        cnt = _two_way(pat, ell, per, periodic, buf, base, end, state, stop, out, out.shape[0])
        if cnt:
            total += cnt
            if sink is not None:
                sink(out[:cnt])
            continue
        j = int(state[0])
        if j >= stop or end >= last_end:
            break
        keep = end - j if j < end else 0
        nb = j if j < end else j
        if keep:
            buf[:keep] = buf[j - base:end - base]
        fill = min(w - keep, last_end - (nb + keep))
        src.read_into(nb + keep, buf[keep:keep + fill], "long_phrase")
        if stats is not None:
            stats.streamed += fill
        base, end = nb, nb + keep + fill
    if stats is not None:
        stats.passes += 1
    return total


def find_occurrences(pattern, text, limit: int, out: Optional[CandidateSet] = None,
                     counters: Optional[IoCounters] = None, buffer: int = SCAN_BUFFER) -> CandidateSet:
    """End positions (1-based, inclusive) of ``pattern`` occurrences starting before ``limit`` (1-based)."""
    pat = np.ascontiguousarray(as_u8(pattern))
    src = _as_source(text, counters)
    cs = out if out is not None else CandidateSet(counters=counters)
    m = pat.shape[0]
    _occurrences(src, pat, limit - 1, 0, lambda st: cs.append(st + m), buffer)
    return cs.seal()


# ---------------------------------------------------------------- candidate extension


@njit(cache=True)
def _z_function(p):
    m = p.shape[0]
    z = np.zeros(m, dtype=np.int32)
    if m == 0:
        return z
    z[0] = m
    l, r = 0, 0
    for i in range(1, m):
        k = 0
        if i < r:
            k = min(r - i, z[i - l])
        while i + k < m and p[k] == p[i + k]:
            k += 1
        z[i] = k
        if i + k > r:
            l, r = i, i + k
    return z


@njit(cache=True)
def _lcp_batch(p, zf, cands, ci, h, lr, buf, base, end, n, out):
    """lcp of X[e:] with p for each 0-based e in cands[ci:], in increasing order.

    ``lr`` = (l, r) with X[l:r] = p[:r-l] carries over between calls.  When a
    symbol outside X[base:end] is needed, returns (ci, h, pos) so the caller
    can refill from ``pos`` (always forward) and resume.
    """
    m = p.shape[0]
    l, r = lr[0], lr[1]
    while ci < cands.shape[0]:
        e = cands[ci]
        if h < 0:
            if e < r:
                zk = np.int64(zf[e - l])
                if zk < r - e:
                    out[ci] = zk
                    ci += 1
                    continue
                h = r - e
            else:
                h = 0
        lim = min(m, n - e)
        while h < lim:
            pos = e + h
            if pos >= end:
                lr[0], lr[1] = l, r
                return ci, h, pos
            if buf[pos - base] != p[h]:
                break
            h += 1
        out[ci] = h
        if e + h > r:
            l, r = e, e + h
        ci += 1
        h = -1
    lr[0], lr[1] = l, r
    return ci, -1, -1


class _LcpStream:
    """Forward-only lcp queries of one pattern against increasing text positions."""

    def __init__(self, src, pat: np.ndarray, buffer: int, stats: Optional[MatchStats]):
        self.src, self.pat, self.stats = src, pat, stats
        self.z = _z_function(pat)
        self.buf = np.empty(buffer, dtype=np.uint8)
        self.base = self.end = 0
        self.lr = np.zeros(2, dtype=np.int64)

    def lcps(self, starts: np.ndarray, horizon: int) -> np.ndarray:
        """``horizon`` bounds how far the text may usefully be read ahead."""
        out = np.zeros(starts.shape[0], dtype=np.int64)
        ci, h = 0, -1
        n = self.src.n
        while True:
            ci, h, pos = _lcp_batch(self.pat, self.z, starts, ci, h, self.lr, self.buf,
                                    self.base, self.end, n, out)
            if pos < 0:
                return out
            k = max(1, min(self.buf.shape[0], min(n, horizon) - pos))
            self.src.read_into(pos, self.buf[:k], "long_phrase")
            if self.stats is not None:
                self.stats.streamed += k
            self.base, self.end = pos, pos + k


def extend_candidates(candidates: CandidateSet, next_chunk, text, out: Optional[CandidateSet] = None,
                      counters: Optional[IoCounters] = None, buffer: int = SCAN_BUFFER) -> CandidateSet:
    """Candidates whose occurrence continues with ``next_chunk``, ends advanced."""
    pat = np.ascontiguousarray(as_u8(next_chunk))
    src = _as_source(text, counters)
    res = out if out is not None else CandidateSet(counters=counters)
    m = pat.shape[0]
    if m == 0:
        for b in candidates.batches():
            res.append(b)
        return res.seal()
    stream = _LcpStream(src, pat, buffer, None)
    for ends in candidates.batches():
        l = stream.lcps(ends, int(ends[-1]) + m)
        res.append(ends[l == m] + m)
    return res.seal()


# ---------------------------------------------------------------- resolution


@dataclass
class LongPhraseResult:
    src: int  # 0-based
    len: int
    rounds: int
    streamed: int
    search_passes: int = 0

    @property
    def phrase(self) -> Phrase:
        return Phrase.copy(self.src + 1, self.len)


def resolve_long_phrase(phrase_start: int, chunk: int, text, cand_path: Optional[str] = None,
                        counters: Optional[IoCounters] = None, buffer: int = SCAN_BUFFER,
                        min_len: int = 0, hint_src: int = -1) -> LongPhraseResult:
    """Longest previous factor at 0-based ``phrase_start``, found chunk by chunk.

    Each round uses a pattern of at most ``chunk`` symbols.  ``min_len`` and
    ``hint_src`` describe a known match (the block-local tail); they are only
    used when the first chunk has no earlier occurrence, which cannot happen
    when ``min_len >= chunk``.
    """
    src = _as_source(text, counters)
    n = src.n
    t = phrase_start
    if chunk < 1:
        raise ValueError("chunk must be positive")
    stats = MatchStats()
    if t == 0 or t >= n:
        return LongPhraseResult(-1, 0, 0, 0)
    path = cand_path
    cur = CandidateSet(path, counters)
    try:
        m1 = min(chunk, n - t)
        pat = np.empty(m1, dtype=np.uint8)
        src.read_into(t, pat, "long_phrase")
        stats.streamed += m1
        _occurrences(src, pat, t, 0, lambda st: cur.append(st + m1), buffer, stats)
        cur.seal()
        rounds = 1
        if cur.count == 0:
            # first chunk too long: shrink it (never reached from the pipeline)
            return _resolve_short(src, t, pat, stats, buffer)
        done = m1
        while True:
            first = cur.first()
            if t + done >= n:
                return LongPhraseResult(first - done, done, rounds, stats.streamed, stats.passes)
            m = min(chunk, n - (t + done))
            pat = np.empty(m, dtype=np.uint8)
            src.read_into(t + done, pat, "long_phrase")
            stats.streamed += m
            nxt = CandidateSet(cur.path + ".next", counters)
            stream = _LcpStream(src, pat, buffer, stats)
            best, best_end = -1, -1
            for ends in cur.batches():
                l = stream.lcps(ends, int(ends[-1]) + m)
                nxt.append(ends[l == m] + m)
                k = int(np.argmax(l))
                if l[k] > best:
                    best, best_end = int(l[k]), int(ends[k])
            stats.passes += 1
            rounds += 1
            nxt.seal()
            if nxt.count == 0:
                nxt.delete()
                return LongPhraseResult(best_end - done, done + best, rounds, stats.streamed, stats.passes)
            cur.replace_with(nxt)
            done += m
    finally:
        cur.delete()


def _resolve_short(src, t, pat, stats, buffer) -> LongPhraseResult:
    """Longest prefix of ``pat`` occurring before ``t``, by binary search on its length."""
    lo, hi = 0, pat.shape[0] - 1  # lengths known to occur / upper bound
    best_src = -1
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        found = []

        def sink(st):
            if not found:
                found.append(int(st[0]))

        _occurrences(src, np.ascontiguousarray(pat[:mid]), t, 0, sink, buffer, stats)
        if found:
            lo, best_src = mid, found[0]
        else:
            hi = mid - 1
    return LongPhraseResult(best_src if lo else -1, lo, 1, stats.streamed, stats.passes)
