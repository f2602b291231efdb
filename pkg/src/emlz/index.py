"""In-memory structures over the current block.

Everything here is block-local and 0-based internally: ``sa`` holds int32
suffix start offsets, ``lcp[r]`` is the common prefix length of suffixes
``sa[r-1]`` and ``sa[r]``.  Suffix comparison has no sentinel; the shorter of
two suffixes that agree up to its end is the smaller one.

Backward search runs on a BWT with one extra row in front of the suffix array
that stands for the empty suffix, so row ``r + 1`` is suffix array rank ``r``.
The public :class:`SaInterval` uses 1-based ranks, which are exactly these
rows; the empty string spans every suffix, ``[1..b]``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from .core import LpfEntry, as_u8

OCC_STEP_SHIFT = 7  # rank checkpoint every 128 rows
OCC_SUPER_SHIFT = 16  # absolute counts every 65536 rows
MAX_BLOCK = 2**31 - 1


class ConfigError(ValueError):
    pass


class SaInterval(NamedTuple):
    lo: int
    hi: int
    len: int

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


# ------------------------------------------------------------------ SA-IS
# Induced sorting after Nong, Zhang and Chan, without a sentinel (the end of
# the string acts as the smallest symbol).  Recursion and every allocation
# stay in Python so that the memory is visible to tracemalloc; the jitted
# kernels only loop.


@njit(cache=True)
def _classify(s, ls):
    n = s.shape[0]
    ls[n - 1] = 0
    for i in range(n - 2, -1, -1):
        if s[i] == s[i + 1]:
            ls[i] = ls[i + 1]
        else:
            ls[i] = 1 if s[i] < s[i + 1] else 0
    m = 0
    for i in range(1, n):
        if ls[i] and not ls[i - 1]:
            m += 1
    return m


@njit(cache=True)
def _bucket(s, ls, buf, kind):
    # kind 0: first slot of the S part of each bucket, 1: bucket start,
    # 2: bucket end (exclusive)
    buf[:] = 0
    for i in range(s.shape[0]):
        buf[s[i] + 1] += 1
    acc = 0
    for c in range(buf.shape[0]):
        acc += buf[c]
        buf[c] = acc
    if kind == 0:
        for i in range(s.shape[0]):
            if not ls[i]:
                buf[s[i]] += 1
    elif kind == 2:
        for c in range(buf.shape[0] - 1):
            buf[c] = buf[c + 1]


@njit(cache=True)
def _induce(s, ls, sa, lms, buf):
    n = s.shape[0]
    sa[:] = -1
    _bucket(s, ls, buf, 0)
    for k in range(lms.shape[0]):
        d = lms[k]
        sa[buf[s[d]]] = d
        buf[s[d]] += 1
    _bucket(s, ls, buf, 1)
    sa[buf[s[n - 1]]] = n - 1
    buf[s[n - 1]] += 1
    for i in range(n):
        v = sa[i]
        if v >= 1 and not ls[v - 1]:
            c = s[v - 1]
            sa[buf[c]] = v - 1
            buf[c] += 1
    _bucket(s, ls, buf, 2)
    for i in range(n - 1, -1, -1):
        v = sa[i]
        if v >= 1 and ls[v - 1]:
            c = s[v - 1]
            buf[c] -= 1
            sa[buf[c]] = v - 1


@njit(cache=True)
def _fill_lms(ls, out):
    k = 0
    for i in range(1, ls.shape[0]):
        if ls[i] and not ls[i - 1]:
            out[k] = i
            k += 1


@njit(cache=True)
def _next_lms(ls, x):
    n = ls.shape[0]
    i = x + 1
    while i < n and not (ls[i] and not ls[i - 1]):
        i += 1
    return i


@njit(cache=True)
def _name_lms(s, ls, sa, m):
    n = s.shape[0]
    k = 0
    for i in range(n):
        v = sa[i]
        if v >= 1 and ls[v] and not ls[v - 1]:
            sa[k] = v
            k += 1
    for i in range(m, n):
        sa[i] = -1
    name = -1
    prev = -1
    for i in range(m):
        pos = sa[i]
        same = False
        if prev >= 0:
            ep = _next_lms(ls, prev)
            eq = _next_lms(ls, pos)
            if ep - prev == eq - pos and ep < n and eq < n:
                same = True
                for t in range(ep - prev + 1):
                    if s[prev + t] != s[pos + t]:
                        same = False
                        break
        if not same:
            name += 1
        prev = pos
        sa[m + pos // 2] = name
    j = n - 1
    for i in range(n - 1, m - 1, -1):
        if sa[i] >= 0:
            sa[j] = sa[i]
            j -= 1
    return name + 1


@njit(cache=True)
def _map_sorted_lms(lms_pos, rec_sa):
    for i in range(rec_sa.shape[0]):
        rec_sa[i] = lms_pos[rec_sa[i]]


@njit(cache=True)
def _invert_names(rec_s, rec_sa):
    for i in range(rec_s.shape[0]):
        rec_sa[rec_s[i]] = i


def suffix_array(s, upper: int = 255) -> np.ndarray:
    """Suffix array of ``s`` (uint8 or int32 symbols in ``[0..upper]``)."""
    n = s.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int32)
    if n == 1:
        return np.zeros(1, dtype=np.int32)
    if n == 2:
        return np.array([0, 1] if s[0] < s[1] else [1, 0], dtype=np.int32)
    ls = np.empty(n, dtype=np.uint8)
    m = _classify(s, ls)
    buf = np.empty(upper + 2, dtype=np.int32)
    sa = np.empty(n, dtype=np.int32)
    lms = np.empty(m, dtype=np.int32)
    _fill_lms(ls, lms)
    _induce(s, ls, sa, lms, buf)
    if m == 0:
        return sa
    del lms
    names = _name_lms(s, ls, sa, m)
    rec_s = sa[n - m:]
    if names < m:
        del buf
        rec_sa = suffix_array(rec_s, names - 1)
        buf = np.empty(upper + 2, dtype=np.int32)
    else:
        rec_sa = np.empty(m, dtype=np.int32)
        _invert_names(rec_s, rec_sa)
    lms_pos = sa[n - m:]
    _fill_lms(ls, lms_pos)
    _map_sorted_lms(lms_pos, rec_sa)
    _induce(s, ls, sa, rec_sa, buf)
    return sa


# ------------------------------------------------------------------ LCP


@njit(cache=True)
def _phi_lcp(s, sa, phi, lcp):
    n = s.shape[0]
    phi[sa[0]] = -1
    for r in range(1, n):
        phi[sa[r]] = sa[r - 1]
    l = 0
    for i in range(n):
        j = phi[i]
        if j < 0:
            phi[i] = 0
            l = 0
            continue
        while i + l < n and j + l < n and s[i + l] == s[j + l]:
            l += 1
        phi[i] = l
        if l > 0:
            l -= 1
    for r in range(n):
        lcp[r] = phi[sa[r]]


def lcp_array(s, sa) -> np.ndarray:
    n = sa.shape[0]
    lcp = np.empty(n, dtype=np.int32)
    if n:
        phi = np.empty(n, dtype=np.int32)
        _phi_lcp(s, sa, phi, lcp)
        del phi
    return lcp


# ------------------------------------------------------------------ rank


@njit(cache=True)
def _build_rank(block, sa, bwt, sup, small):
    b = block.shape[0]
    bwt[0] = block[b - 1]
    p0 = -1
    for r in range(b):
        p = sa[r]
        if p > 0:
            bwt[r + 1] = block[p - 1]
        else:
            bwt[r + 1] = 0
            p0 = r + 1
    cnt = np.zeros(256, dtype=np.int64)
    rows = bwt.shape[0]
    nk = small.shape[0]
    for k in range(nk):
        t0 = k << OCC_STEP_SHIFT
        if (t0 & ((1 << OCC_SUPER_SHIFT) - 1)) == 0:
            g = t0 >> OCC_SUPER_SHIFT
            for c in range(256):
                sup[g, c] = cnt[c]
        g = k >> (OCC_SUPER_SHIFT - OCC_STEP_SHIFT)
        for c in range(256):
            small[k, c] = cnt[c] - sup[g, c]
        hi = min(rows, t0 + (1 << OCC_STEP_SHIFT))
        for t in range(t0, hi):
            cnt[bwt[t]] += 1
    return p0


M7 = np.uint64(0x7F7F7F7F7F7F7F7F)
ONES = np.uint64(0x0101010101010101)


@njit(cache=True, inline="always")
def _zero_bytes(v):
    t = ~(((v & M7) + M7) | v | M7)
    return np.int64(((t >> np.uint64(7)) * ONES) >> np.uint64(56))


@njit(cache=True)
def _rank(w64, sup, small, p0, c, i):
    """Occurrences of ``c`` in bwt[0:i], ignoring the row of suffix 0.

    ``w64`` is the BWT viewed as little-endian 64-bit words.  The in-window
    count always visits the checkpoint's 16 words and masks, which avoids
    branch mispredictions on the variable trip count.
    """
    k = i >> OCC_STEP_SHIFT
    r = sup[k >> (OCC_SUPER_SHIFT - OCC_STEP_SHIFT), c] + small[k, c]
    pat = np.uint64(c) * ONES
    w0 = k << (OCC_STEP_SHIFT - 3)
    wz = i >> 3
    tail = ~np.uint64(0) << np.uint64(8 * (i & 7))
    acc = 0
    for u in range(1 << (OCC_STEP_SHIFT - 3)):
        v = w64[w0 + u] ^ pat
        acc += np.int64(w0 + u < wz) * _zero_bytes(v) + np.int64(w0 + u == wz) * _zero_bytes(v | tail)
    r += acc
    if c == 0 and p0 < i:
        r -= 1
    return r


@njit(cache=True)
def _symbol_starts(block, cstart):
    cstart[:] = 0
    for i in range(block.shape[0]):
        cstart[block[i] + 1] += 1
    for c in range(256):
        cstart[c + 1] += cstart[c]


# ------------------------------------------------------------------ search kernels


@njit(cache=True)
def _key(block, sa, r, d):
    p = sa[r] + d
    if p >= block.shape[0]:
        return -1
    return np.int64(block[p])


@njit(cache=True)
def _narrow(block, sa, lo, hi, d, ch):
    """Sub-range of SA ranks [lo, hi] whose symbol at depth d equals ch."""
    a, z = lo, hi + 1
    while a < z:
        mid = (a + z) >> 1
        if _key(block, sa, mid, d) < ch:
            a = mid + 1
        else:
            z = mid
    first = a
    z = hi + 1
    while a < z:
        mid = (a + z) >> 1
        if _key(block, sa, mid, d) <= ch:
            a = mid + 1
        else:
            z = mid
    return first, a - 1


@njit(cache=True)
def _extend_right(block, sa, lo, hi, d, pat, start, stop):
    """Narrow an SA interval of depth d by pat[start:stop].

    Returns (lo, hi, depth, consumed, failed).  On failure the interval and
    depth of the longest matched prefix are returned.
    """
    b = block.shape[0]
    k = start
    while k < stop:
        ch = np.int64(pat[k])
        if lo == hi:
            p = sa[lo]
            while k < stop and p + d < b and block[p + d] == pat[k]:
                d += 1
                k += 1
            if k < stop:
                return lo, hi, d, k - start, True
            break
        nlo, nhi = _narrow(block, sa, lo, hi, d, ch)
        if nlo > nhi:
            return lo, hi, d, k - start, True
        lo, hi = nlo, nhi
        d += 1
        k += 1
    return lo, hi, d, k - start, False


@njit(cache=True)
def _extend_left(bwt, sup, small, p0, cp, lo, hi, c):
    """Rows [lo, hi] of w -> rows of c.w (lo > hi when absent)."""
    base = cp[c]
    return base + _rank(bwt, sup, small, p0, c, lo), base + _rank(bwt, sup, small, p0, c, hi + 1) - 1


# ------------------------------------------------------------------ LPF of a block


@njit(cache=True)
def _lpf_merge(sa, lcp, out_len, out_lo, out_hi, offset):
    """Longest previous factor of every block position, merged into ``out``.

    One left-to-right pass; the stack of pending ranks is kept in the prefix
    of ``sa``/``lcp`` already consumed, so both are destroyed.  A slot is
    overwritten only when strictly longer (ties keep the existing source).
    Sources are written as ``offset + block position``.
    """
    n = sa.shape[0]
    top = -1
    for r in range(n + 1):
        if r < n:
            cur_pos = np.int64(sa[r])
            m = np.int64(lcp[r])
        else:
            cur_pos = -1
            m = 0
        while top >= 0 and sa[top] > cur_pos:
            x = np.int64(sa[top])
            lx = np.int64(lcp[top])
            if lx >= m:
                best = lx
                src = np.int64(sa[top - 1]) if top > 0 else -1
            else:
                best = m
                src = cur_pos
            if best > out_len[x]:
                out_len[x] = best
                a = src + offset
                out_lo[x] = a & 0xFFFFFFFF
                if out_hi.shape[0]:
                    out_hi[x] = a >> 32
            if lx < m:
                m = lx
            top -= 1
        if r < n:
            top += 1
            sa[top] = cur_pos
            lcp[top] = m


class BlockIndex:
    """Suffix array, LCP array and BWT rank structure of one block."""

    def __init__(self, block, block_start: int = 0, mode: int = 40, meter=None):
        block = as_u8(block)
        b = block.shape[0]
        if not 1 <= b <= MAX_BLOCK:
            raise ConfigError(f"block size {b} outside [1, 2^31-1]")
        if mode not in (32, 40):
            raise ConfigError(f"mode must be 32 or 40, not {mode}")
        self.block = block
        self.block_start = int(block_start)
        self.mode = mode
        self.b = b
        self.meter = meter
        self.sa = suffix_array(block)
        self.lcp = lcp_array(block, self.sa)
        self._track(self.sa, self.lcp)
        self.cstart = np.empty(257, dtype=np.int64)
        _symbol_starts(block, self.cstart)
        self.crow = self.cstart + 1
        self.bwt = self.bwt64 = self.sup = self.small = None
        self.p0 = -1
        self.build_rank()

    def _track(self, *arrays):
        if self.meter is not None:
            for a in arrays:
                self.meter.alloc(a)

    def build_rank(self):
        rows = self.b + 1
        nk = (rows >> OCC_STEP_SHIFT) + 2
        nsup = ((nk - 1) << OCC_STEP_SHIFT >> OCC_SUPER_SHIFT) + 2
        # zero padding to whole checkpoints; padding is counted consistently
        self.bwt = np.zeros(nk << OCC_STEP_SHIFT, dtype=np.uint8)
        self.bwt64 = self.bwt.view(np.uint64)
        self.sup = np.zeros((nsup, 256), dtype=np.int64)
        self.small = np.zeros((nk, 256), dtype=np.uint16)
        self._track(self.bwt, self.sup, self.small)
        self.p0 = _build_rank(self.block, self.sa, self.bwt, self.sup, self.small)

    def drop_rank(self):
        if self.meter is not None and self.bwt is not None:
            for a in (self.bwt, self.sup, self.small):
                self.meter.free(a)
        self.bwt = self.bwt64 = self.sup = self.small = None

    def nbytes(self) -> int:
        total = self.block.nbytes + self.sa.nbytes + self.lcp.nbytes
        if self.bwt is not None:
            total += self.bwt.nbytes + self.sup.nbytes + self.small.nbytes
        return total

    @property
    def full(self) -> SaInterval:
        return SaInterval(1, self.b, 0)

    @property
    def lpf_b(self) -> list[LpfEntry]:
        return lpf_of_block(self.sa, self.lcp, self.block)

    def suffix(self, rank: int) -> bytes:
        """Suffix at 1-based SA rank (for diagnostics and tests)."""
        return self.block[self.sa[rank - 1]:].tobytes()


def build_block_index(block, block_start: int = 1, mode: int = 40) -> BlockIndex:
    return BlockIndex(block, block_start, mode)


def extend_left(idx: BlockIndex, iv: SaInterval, c: int) -> SaInterval:
    if iv.empty:
        return iv
    lo, hi = (0, idx.b) if iv.len == 0 else (iv.lo, iv.hi)
    nlo, nhi = _extend_left(idx.bwt64, idx.sup, idx.small, idx.p0, idx.crow, lo, hi, int(c))
    if nlo > nhi:
        return SaInterval(1, 0, 0)
    return SaInterval(int(nlo), int(nhi), iv.len + 1)


def interval_by_binary_search(idx: BlockIndex, pattern) -> SaInterval:
    pat = as_u8(pattern)
    if pat.size == 0:
        return idx.full
    lo, hi, d, used, failed = _extend_right(idx.block, idx.sa, 0, idx.b - 1, 0, pat, 0, pat.size)
    if failed:
        return SaInterval(1, 0, 0)
    return SaInterval(int(lo) + 1, int(hi) + 1, int(d))


def lpf_arrays(sa, lcp):
    """(src, len) of the LPF table as 0-based block positions (src -1 if len 0)."""
    n = sa.shape[0]
    ln = np.zeros(n, dtype=np.int32)
    lo = np.zeros(n, dtype=np.uint32)
    _lpf_merge(sa.copy(), lcp.copy(), ln, lo, np.zeros(0, dtype=np.uint8), 0)
    src = lo.astype(np.int64)
    src[ln == 0] = -1
    return src, ln.astype(np.int64)


def lpf_of_block(sa, lcp, block=None) -> list[LpfEntry]:
    src, ln = lpf_arrays(sa, lcp)
    return [LpfEntry(int(s) + 1 if l else None, int(l)) for s, l in zip(src, ln)]
