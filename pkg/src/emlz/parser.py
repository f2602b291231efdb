"""Greedy parsing of one block from its longest-previous-factor table."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from numba import njit

from .core import LpfEntry, MsEntry, Parsing, Phrase, as_u8, ms_brute
from .index import BlockIndex, _lpf_merge, lpf_arrays
from .ms import InvertedMs


class ParseInvariantError(RuntimeError):
    pass


class LeftmostTracker:
    """Absolute position of the first occurrence of every byte value."""

    def __init__(self):
        self.first_seen = np.full(256, -1, dtype=np.int64)

    def seen(self, c: int) -> bool:
        return self.first_seen[c] >= 0

    def mark(self, c: int, pos: int):
        if self.first_seen[c] >= 0:
            raise ParseInvariantError(f"symbol {c} already seen at {self.first_seen[c]}")
        self.first_seen[c] = pos


class Tail(NamedTuple):
    start: int  # absolute, 0-based
    src: int    # absolute, 0-based
    len: int


@dataclass
class BlockParseResult:
    complete_phrases: Parsing
    tail: Optional[Tail]
    next_block_start: int
    parsed_positions: int = 0


def merge_lpf(ms_b_a: InvertedMs, idx: BlockIndex) -> InvertedMs:
    """Fold the block's own LPF into ``ms_b_a`` in place (ties keep the MS source).

    Consumes ``idx.sa`` and ``idx.lcp``; ``ms_b_a`` must be in text order.
    """
    if ms_b_a.order != "text":
        raise ValueError("merge_lpf needs a finalized inversion")
    _lpf_merge(idx.sa, idx.lcp, ms_b_a.ev_len, ms_b_a.ev_lo, ms_b_a.ev_hi, idx.block_start)
    idx.sa = idx.lcp = None
    ms_b_a.order = "lpf"
    return ms_b_a


def merge_lpf_entries(ms_b_a: Sequence[MsEntry], lpf_b: Sequence[LpfEntry], block_start: int) -> list[LpfEntry]:
    """Entry-level merge with 1-based ``block_start`` (reference form)."""
    out = []
    for m, l in zip(ms_b_a, lpf_b):
        if l.len > m.len:
            out.append(LpfEntry(block_start - 1 + l.src, l.len))
        else:
            out.append(LpfEntry(m.src, m.len))
    return out


@njit(cache=True)
def _parse_block(block, ev_len, ev_lo, ev_hi, s, final, first_seen):
    """Greedy parse; phrase k overwrites slot k (k <= its start, already read).

    Returns (z, tail_j, tail_len, tail_src, err) with tail_j = -1 when the
    block ends on a phrase boundary and err >= 0 the position of a literal
    whose symbol had been seen before.
    """
    b = block.shape[0]
    wide = ev_hi.shape[0] > 0
    j = 0
    k = 0
    while j < b:
        l = np.int64(ev_len[j])
        if l == 0:
            c = block[j]
            if first_seen[c] >= 0:
                return k, -1, 0, 0, j
            first_seen[c] = s + j
            ev_len[k] = 0
            ev_lo[k] = c
            if wide:
                ev_hi[k] = 0
            j += 1
            k += 1
            continue
        src = np.int64(ev_lo[j])
        if wide:
            src |= np.int64(ev_hi[j]) << 32
        if j + l >= b and not final:
            return k, j, l, src, -1
        ev_len[k] = l
        ev_lo[k] = ev_lo[j]
        if wide:
            ev_hi[k] = ev_hi[j]
        j += l
        k += 1
    return k, -1, 0, 0, -1


def block_phrases(inv: InvertedMs, z: int, lo: int = 0, hi: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Slots [lo, hi) of a parsed block as output columns (1-based sources)."""
    hi = z if hi is None else hi
    ln = inv.ev_len[lo:hi].astype(np.int64)
    src = inv.ev_lo[lo:hi].astype(np.int64)
    if inv.ev_hi.shape[0]:
        src |= inv.ev_hi[lo:hi].astype(np.int64) << 32
    src += ln > 0
    return src, ln


def parse_block(lpf_ab: InvertedMs, block, block_start: int, n: int, tracker: LeftmostTracker,
                b: Optional[int] = None) -> BlockParseResult:
    """Parse the block in place; ``lpf_ab`` holds its merged LPF table (text order).

    ``b`` is the configured block size, used by the restart rule.
    """
    block = as_u8(block)
    bp = block.shape[0]
    final = block_start + bp >= n
    z, tj, tl, ts, err = _parse_block(block, lpf_ab.ev_len, lpf_ab.ev_lo, lpf_ab.ev_hi,
                                      block_start, final, tracker.first_seen)
    if err >= 0:
        raise ParseInvariantError(f"literal at {block_start + err} for a symbol seen before")
    lpf_ab.order = "parsed"
    src, ln = block_phrases(lpf_ab, z)
    if tj < 0:
        return BlockParseResult(Parsing(src, ln), None, block_start + bp, bp)
    tail = Tail(block_start + int(tj), int(ts), int(tl))
    nxt = resolve_tail(tail, b or bp)
    return BlockParseResult(Parsing(src, ln), tail, tail.start if nxt == RESTART else -1, bp)


RESTART, HANDOFF = "restart", "handoff"


def resolve_tail(tail: Optional[Tail], b: int) -> str:
    if tail is None or tail.len == 0:
        return "none"
    return RESTART if 2 * tail.len <= b else HANDOFF


def relative_parse(y, z) -> Parsing:
    """Greedy parse of ``y`` with every source taken from ``z``."""
    ms = ms_brute(y, z)
    ya = as_u8(y)
    src, ln = [], []
    i = 0
    while i < len(ms):
        e = ms[i]
        if e.len == 0:
            src.append(int(ya[i]))
            ln.append(0)
            i += 1
        else:
            src.append(e.src)
            ln.append(e.len)
            i += e.len
    return Parsing(src, ln)


def decode_relative(parsing: Parsing, z) -> bytes:
    za = as_u8(z).tobytes()
    out = bytearray()
    for p in parsing:
        if p.len == 0:
            out.append(p.src)
        else:
            out += za[p.src - 1:p.src - 1 + p.len]
    return bytes(out)
