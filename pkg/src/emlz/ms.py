"""Matching statistics of the text prefix against the current block.

The prefix A = X[0:s] is streamed right to left.  For every position q the
kernel keeps the BWT rows of the longest prefix of X[q:] occurring in the
block B = X[s:s+b] and drops one piece of evidence, (length, q), on the first
row of that interval.  Two LCP-clamped sweeps over suffix-array order then
turn the evidence into, for every block position, the longest match with a
source that starts inside A.  The per-position matching statistics of A are
never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numba import njit

from .core import MsEntry, as_u8
from .index import BlockIndex, SaInterval, _extend_left, _extend_right

SCAN_DONE, SCAN_SKIP, SCAN_NEED_LOG = 0, 1, 2
WIDEN_LINEAR = 64
LO_MASK = 0xFFFFFFFF


@njit(cache=True)
def _row_lcp(block, sa, row, c, seg, t, wpos, wlen):
    """lcp of c.w with the suffix at BWT row ``row``.

    w = seg[t-1], seg[t-2], ... while the segment lasts, then continues at
    block[wpos + t:] (``wpos`` locates an occurrence of w in the block).
    """
    b = block.shape[0]
    if row < 1 or row > b:
        return 0
    p = sa[row - 1]
    if block[p] != c:
        return 0
    l = 1
    while l <= wlen and p + l < b:
        ch = seg[t - l] if l <= t else block[wpos + l - 1]
        if block[p + l] != ch:
            break
        l += 1
    return l


@njit(cache=True)
def _has_prefix(block, sa, row, ppos, plen):
    b = block.shape[0]
    p = sa[row - 1]
    if p + plen > b:
        return False
    for k in range(plen):
        if block[p + k] != block[ppos + k]:
            return False
    return True


@njit(cache=True)
def _widen(block, sa, lcp, lo, hi, plen):
    """Grow rows [lo, hi] to every row sharing their first ``plen`` symbols."""
    b = block.shape[0]
    steps = 0
    while lo > 1 and lcp[lo - 1] >= plen and steps < WIDEN_LINEAR:
        lo -= 1
        steps += 1
    if lo > 1 and lcp[lo - 1] >= plen:
        ppos = sa[lo - 1]
        a, z = 1, lo
        while a < z:
            mid = (a + z) >> 1
            if _has_prefix(block, sa, mid, ppos, plen):
                z = mid
            else:
                a = mid + 1
        lo = a
    steps = 0
    while hi < b and lcp[hi] >= plen and steps < WIDEN_LINEAR:
        hi += 1
        steps += 1
    if hi < b and lcp[hi] >= plen:
        ppos = sa[hi - 1]
        a, z = hi, b
        while a < z:
            mid = (a + z + 1) >> 1
            if _has_prefix(block, sa, mid, ppos, plen):
                a = mid
            else:
                z = mid - 1
        hi = a
    return lo, hi


@njit(cache=True)
def _step_left(block, sa, lcp, w64, sup, small, p0, crow, lo, hi, L, seg, t):
    """Longest-match rows for c.w given rows [lo, hi] of w (|w| = L), c = seg[t]."""
    b = block.shape[0]
    c = seg[t]
    nlo, nhi = _extend_left(w64, sup, small, p0, crow, lo, hi, c)
    if nlo <= nhi:
        return nlo, nhi, L + 1
    wpos = sa[lo - 1] if L > t else 0
    lp = _row_lcp(block, sa, nlo - 1, c, seg, t, wpos, L)
    ln = _row_lcp(block, sa, nlo, c, seg, t, wpos, L)
    m = max(lp, ln)
    if m == 0:
        return 0, b, 0
    if m == 1:
        return crow[c], crow[c + 1] - 1, 1
    rlo = nlo - 1 if lp >= m else nlo
    rhi = nlo if ln >= m else nlo - 1
    rlo, rhi = _widen(block, sa, lcp, rlo, rhi, m)
    return rlo, rhi, m


@njit(cache=True)
def _put(ev_len, ev_lo, ev_hi, r, L, q):
    if L > ev_len[r]:
        ev_len[r] = L
        ev_lo[r] = q & LO_MASK
        if ev_hi.shape[0]:
            ev_hi[r] = q >> 32


@njit(cache=True)
def _scan_segment(seg, q_hi, t0, state, block, sa, lcp, w64, sup, small, p0, crow,
                  ev_len, ev_lo, ev_hi, rec_start, rec_end, cur, log_done,
                  tr_pos, tr_row, tr_len, counters):
    """Process seg[t0:], where seg[t] = X[q_hi - t].

    ``state`` holds (lo, hi, L) for position q_hi - t0 + 1 and is updated in
    place; ``cur[0]`` is the index of the first log record with start <= q.
    Returns (status, t, skip_target).
    """
    lo, hi, L = state[0], state[1], state[2]
    ridx = cur[0]
    nrec = rec_start.shape[0]
    ntr = tr_pos.shape[0]
    t = t0
    nseg = seg.shape[0]
    status = SCAN_DONE
    target = 0
    while t < nseg:
        q = q_hi - t
        while ridx < nrec and rec_start[ridx] > q:
            ridx += 1
        if ridx == nrec and not log_done:
            status = SCAN_NEED_LOG
            break
        lo, hi, L = _step_left(block, sa, lcp, w64, sup, small, p0, crow, lo, hi, L, seg, t)
        if ridx < nrec and q < rec_end[ridx] and q + L <= rec_end[ridx]:
            status = SCAN_SKIP
            target = rec_start[ridx] - 1
            break
        if L > 0:
            _put(ev_len, ev_lo, ev_hi, lo - 1, L, q)
        k = counters[0]
        if k < ntr:
            tr_pos[k] = q
            tr_row[k] = lo
            tr_len[k] = L
        counters[0] = k + 1
        t += 1
    state[0], state[1], state[2] = lo, hi, L
    cur[0] = ridx
    return status, t, target


@njit(cache=True)
def _propagate(ev_len, ev_lo, ev_hi, lcp):
    n = ev_len.shape[0]
    wide = ev_hi.shape[0] > 0
    cl, cs, ch = 0, 0, 0
    for r in range(n):
        if r > 0 and lcp[r] < cl:
            cl = lcp[r]
        if ev_len[r] > cl:
            cl, cs = ev_len[r], ev_lo[r]
            if wide:
                ch = ev_hi[r]
        else:
            ev_len[r], ev_lo[r] = cl, cs
            if wide:
                ev_hi[r] = ch
    cl = 0
    for r in range(n - 1, -1, -1):
        if r < n - 1 and lcp[r + 1] < cl:
            cl = lcp[r + 1]
        if ev_len[r] > cl:
            cl, cs = ev_len[r], ev_lo[r]
            if wide:
                ch = ev_hi[r]
        elif cl > 0:
            ev_len[r], ev_lo[r] = cl, cs
            if wide:
                ev_hi[r] = ch


@njit(cache=True)
def _permute_to_text(sa, ev_len, ev_lo, ev_hi):
    """Move entry r to slot sa[r], in place, by following cycles."""
    n = sa.shape[0]
    wide = ev_hi.shape[0] > 0
    for r0 in range(n):
        if sa[r0] < 0:
            continue
        cl, cs = ev_len[r0], ev_lo[r0]
        ch = ev_hi[r0] if wide else 0
        p = r0
        while True:
            q = sa[p]
            sa[p] = ~q
            tl, ts = ev_len[q], ev_lo[q]
            ev_len[q], ev_lo[q] = cl, cs
            cl, cs = tl, ts
            if wide:
                th = ev_hi[q]
                ev_hi[q] = ch
                ch = th
            p = q
            if p == r0:
                break
    for r in range(n):
        sa[r] = ~sa[r]


@dataclass
class InvertedMs:
    """Per-block matching statistics against sources in the prefix.

    ``order`` is ``"sa"`` while evidence is being collected and ``"text"``
    after :func:`finalize_inversion`.  Sources are absolute 0-based positions
    split into a low uint32 word and, in 40-bit mode, a high byte.
    """

    ev_len: np.ndarray
    ev_lo: np.ndarray
    ev_hi: np.ndarray
    order: str = "sa"

    @classmethod
    def empty(cls, b: int, mode: int = 40, meter=None) -> "InvertedMs":
        inv = cls(np.zeros(b, dtype=np.int32), np.zeros(b, dtype=np.uint32),
                  np.zeros(b if mode == 40 else 0, dtype=np.uint8))
        if meter is not None:
            for a in (inv.ev_len, inv.ev_lo, inv.ev_hi):
                meter.alloc(a)
        return inv

    def sources(self) -> np.ndarray:
        src = self.ev_lo.astype(np.int64)
        if self.ev_hi.shape[0]:
            src |= self.ev_hi.astype(np.int64) << 32
        return src

    def nbytes(self) -> int:
        return self.ev_len.nbytes + self.ev_lo.nbytes + self.ev_hi.nbytes

    def entries(self) -> list[MsEntry]:
        """1-based view: MsEntry(block position, absolute source, length)."""
        src = self.sources()
        return [MsEntry(i + 1, int(s) + 1 if l else None, int(l))
                for i, (s, l) in enumerate(zip(src, self.ev_len))]


def invert_entry(inv: InvertedMs, idx: BlockIndex, e: MsEntry, iv: Optional[SaInterval] = None) -> InvertedMs:
    """Record one entry of the prefix statistics (1-based ``e.pos``).

    ``iv`` is the SA interval the scan already holds; without it the interval
    is looked up from the block by binary search.
    """
    if e.len == 0:
        return inv
    if iv is None:
        s = e.src - 1
        iv = _binary_interval(idx, idx.block[s:s + e.len])
    _put(inv.ev_len, inv.ev_lo, inv.ev_hi, iv.lo - 1, e.len, e.pos - 1)
    return inv


def _binary_interval(idx, pat):
    lo, hi, d, used, failed = _extend_right(idx.block, idx.sa, 0, idx.b - 1, 0, pat, 0, pat.size)
    return SaInterval(int(lo) + 1, int(hi) + 1, int(d))


def finalize_inversion(inv: InvertedMs, idx: BlockIndex) -> InvertedMs:
    if inv.order != "sa":
        raise ValueError("inversion already finalized")
    _propagate(inv.ev_len, inv.ev_lo, inv.ev_hi, idx.lcp)
    _permute_to_text(idx.sa, inv.ev_len, inv.ev_lo, inv.ev_hi)
    inv.order = "text"
    return inv


def recompute_after_skip(idx: BlockIndex, text_window, read_more: Optional[Callable[[int], bytes]] = None) -> SaInterval:
    """Match X[i-1:] against the block from scratch, left to right.

    ``text_window`` starts at the position to recompute.  ``read_more(k)``,
    when given, returns the next ``k`` symbols once the window runs out.
    """
    b = idx.b
    lo, hi, d = 0, b - 1, 0
    pat = as_u8(text_window)
    while True:
        stop = min(pat.size, b - d)
        lo, hi, d, used, failed = _extend_right(idx.block, idx.sa, lo, hi, d, pat, 0, stop)
        if failed or d >= b or read_more is None:
            break
        pat = as_u8(read_more(max(4096, min(d, b - d))))
        if pat.size == 0:
            break
    if d == 0:
        return SaInterval(1, 0, 0)
    return SaInterval(int(lo) + 1, int(hi) + 1, int(d))


@dataclass
class ScanStats:
    emitted: int = 0
    skips: int = 0
    skipped_positions: int = 0
    reread_bytes: int = 0
    trace: Optional[list] = field(default=None, repr=False)


class _RecordCursor:
    """Batched, decreasing-start view of a skip log (0-based starts)."""

    def __init__(self, reader, batch: int):
        self.reader = reader
        self.batch = batch
        self.start = np.zeros(0, dtype=np.int64)
        self.end = np.zeros(0, dtype=np.int64)
        self.cur = np.zeros(1, dtype=np.int64)
        self.done = reader is None
        if not self.done:
            self.refill()

    def refill(self):
        st, ln = self.reader.read_batch(self.batch)
        if st.size < self.batch:
            self.done = True
        self.start = st - 1
        self.end = self.start + ln
        self.cur[0] = 0

    def containing(self, q):
        """Record (start, end) with start <= q, refilling as needed."""
        while True:
            i = int(self.cur[0])
            while i < self.start.size and self.start[i] > q:
                i += 1
            self.cur[0] = i
            if i < self.start.size:
                return int(self.start[i]), int(self.end[i])
            if self.done:
                return None
            self.refill()


def scan_prefix(idx: BlockIndex, scanner, skip_reader=None, inv: Optional[InvertedMs] = None,
                read_forward: Optional[Callable[[int, int], bytes]] = None,
                trace: bool = False, log_batch: int = 4096) -> tuple[InvertedMs, ScanStats]:
    """Stream A = X[0:s] backward against the block starting at s.

    ``scanner`` yields ``(q_hi, seg)`` with ``seg[t] = X[q_hi - t]`` and
    supports ``jump(q)``; ``skip_reader`` serves logged long phrases in
    decreasing start order; ``read_forward(pos, k)`` returns X[pos:pos+k]
    and is needed only when skips happen.
    """
    if inv is None:
        inv = InvertedMs.empty(idx.b, idx.mode)
    stats = ScanStats(trace=[] if trace else None)
    s = idx.block_start
    if s == 0:
        return inv, stats
    b = idx.b
    state = np.array([idx.p0, idx.p0, b], dtype=np.int64)
    recs = _RecordCursor(skip_reader, log_batch)
    counters = np.zeros(1, dtype=np.int64)
    tr_cap = s + 1 if trace else 0
    tr_pos = np.zeros(tr_cap, dtype=np.int64)
    tr_row = np.zeros(tr_cap, dtype=np.int64)
    tr_len = np.zeros(tr_cap, dtype=np.int64)
    args = (idx.block, idx.sa, idx.lcp, idx.bwt64, idx.sup, idx.small, idx.p0, idx.crow,
            inv.ev_len, inv.ev_lo, inv.ev_hi)
    finished = False
    for q_hi, seg in scanner.segments():
        t = 0
        while t < seg.shape[0]:
            status, t, target = _scan_segment(seg, q_hi, t, state, *args, recs.start, recs.end,
                                              recs.cur, recs.done, tr_pos, tr_row, tr_len, counters)
            if status == SCAN_NEED_LOG:
                recs.refill()
                continue
            if status == SCAN_DONE:
                break
            q_from = q_hi - t
            q = target
            stats.skips += 1
            while q >= 0:
                iv, nread = _recompute_at(idx, q, read_forward)
                stats.reread_bytes += nread
                rec = recs.containing(q)
                if rec is not None and q < rec[1] and q + iv.len <= rec[1]:
                    q = rec[0] - 1
                    stats.skips += 1
                    continue
                if iv.len:
                    _put(inv.ev_len, inv.ev_lo, inv.ev_hi, iv.lo - 1, iv.len, q)
                k = int(counters[0])
                if k < tr_cap:
                    tr_pos[k], tr_row[k], tr_len[k] = q, iv.lo if iv.len else 0, iv.len
                counters[0] = k + 1
                state[:] = (iv.lo, iv.hi, iv.len) if iv.len else (0, b, 0)
                break
            stats.skipped_positions += q_from - max(q, -1)
            if q <= 0:
                finished = True
                break
            nxt = q_hi - (q - 1)
            if nxt < seg.shape[0]:
                t = nxt
            else:
                scanner.jump(q - 1)
                break
        if finished:
            break
    stats.emitted = int(counters[0])
    if trace:
        k = min(stats.emitted, tr_cap)
        stats.trace = [(int(p), int(r), int(l)) for p, r, l in zip(tr_pos[:k], tr_row[:k], tr_len[:k])]
    return inv, stats


def _recompute_at(idx, q, read_forward):
    s, b = idx.block_start, idx.b
    limit = s + b - q
    first = min(limit, 4096)
    got = [first]
    window = read_forward(q, first)

    def more(k):
        k = min(k, limit - got[0])
        if k <= 0:
            return b""
        data = read_forward(q + got[0], k)
        got[0] += len(data)
        return data

    iv = recompute_after_skip(idx, window, more)
    return iv, got[0]


def trace_entries(stats: ScanStats, idx: BlockIndex) -> list[MsEntry]:
    """Emitted entries of a traced scan: MsEntry(1-based position in X, 1-based source in B, len)."""
    return [MsEntry(q + 1, int(idx.sa[row - 1]) + 1 if l else None, l) for q, row, l in stats.trace]
