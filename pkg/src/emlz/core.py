"""Shared LZ77 types and slow reference oracles.

Positions exposed through :class:`Phrase`, :class:`MsEntry` and
:class:`LpfEntry` are 1-based, matching the on-disk format.  Array-backed
:class:`Parsing` keeps the very same values so that a parse of tens of
millions of phrases never has to exist as Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np
from numba import njit

BytesLike = Union[bytes, bytearray, memoryview, np.ndarray]

COPY = "copy"
LITERAL = "literal"


def as_u8(text: BytesLike) -> np.ndarray:
    if isinstance(text, np.ndarray):
        return np.ascontiguousarray(text, dtype=np.uint8)
    return np.frombuffer(bytes(text), dtype=np.uint8)


@dataclass(frozen=True)
class Phrase:
    kind: str
    src: int
    len: int

    def __post_init__(self):
        if self.kind == LITERAL:
            if self.len != 0 or not 0 <= self.src <= 255:
                raise ValueError(f"bad literal {self}")
        elif self.kind == COPY:
            if self.len < 1 or self.src < 1:
                raise ValueError(f"bad copy {self}")
        else:
            raise ValueError(f"unknown phrase kind {self.kind!r}")

    @classmethod
    def literal(cls, symbol: int) -> "Phrase":
        return cls(LITERAL, int(symbol), 0)

    @classmethod
    def copy(cls, src: int, length: int) -> "Phrase":
        return cls(COPY, int(src), int(length))

    @property
    def span(self) -> int:
        return self.len if self.kind == COPY else 1


class MsEntry(NamedTuple):
    pos: int
    src: Optional[int]
    len: int


class LpfEntry(NamedTuple):
    src: Optional[int]
    len: int


class Parsing:
    """Sequence of phrases stored as two int64 columns.

    ``src[k]`` is the 1-based source of a copy or the symbol of a literal;
    ``length[k]`` is 0 exactly for literals.
    """

    def __init__(self, src=(), length=()):
        self.src = np.ascontiguousarray(src, dtype=np.int64)
        self.length = np.ascontiguousarray(length, dtype=np.int64)
        if self.src.shape != self.length.shape or self.src.ndim != 1:
            raise ValueError("src and length must be 1-d arrays of equal size")

    @classmethod
    def from_phrases(cls, phrases: Sequence[Phrase]) -> "Parsing":
        return cls([p.src for p in phrases], [p.len for p in phrases])

    @property
    def z(self) -> int:
        return int(self.src.shape[0])

    def __len__(self) -> int:
        return self.z

    def __getitem__(self, k: int) -> Phrase:
        s, l = int(self.src[k]), int(self.length[k])
        return Phrase.literal(s) if l == 0 else Phrase.copy(s, l)

    def __iter__(self) -> Iterator[Phrase]:
        for k in range(self.z):
            yield self[k]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Parsing):
            return NotImplemented
        return np.array_equal(self.src, other.src) and np.array_equal(self.length, other.length)

    def __repr__(self) -> str:
        head = ", ".join(repr(p) for p in list(self)[:6])
        return f"Parsing(z={self.z}, [{head}{', ...' if self.z > 6 else ''}])"

    def spans(self) -> np.ndarray:
        return np.maximum(self.length, 1)

    def starts(self) -> np.ndarray:
        """1-based start position of every phrase."""
        sp = self.spans()
        out = np.empty_like(sp)
        if sp.size:
            out[0] = 1
            np.cumsum(sp[:-1], out=out[1:])
            out[1:] += 1
        return out

    def text_length(self) -> int:
        return int(self.spans().sum())


class DecodeError(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"phrase {index}: {reason}")
        self.index = index
        self.reason = reason


# ---------------------------------------------------------------- oracles
# Deliberately naive loops; jitted only so that n of a few thousand is cheap.


@njit(cache=True)
def _match(x, p, i, limit):
    l = 0
    while i + l < limit and x[p + l] == x[i + l]:
        l += 1
    return l


@njit(cache=True)
def _lz77_brute(x, out_src, out_len):
    n = x.shape[0]
    i = 0
    z = 0
    while i < n:
        best, best_p = 0, -1
        for p in range(i):
            l = _match(x, p, i, n)
            if l > best:
                best, best_p = l, p
        if best == 0:
            out_src[z] = x[i]
            out_len[z] = 0
            i += 1
        else:
            out_src[z] = best_p + 1
            out_len[z] = best
            i += best
        z += 1
    return z


@njit(cache=True)
def _lpf_brute(x, out_src, out_len):
    n = x.shape[0]
    for i in range(n):
        best, best_p = 0, -1
        for p in range(i):
            l = _match(x, p, i, n)
            if l > best:
                best, best_p = l, p
        out_src[i] = best_p + 1
        out_len[i] = best


@njit(cache=True)
def _ms_brute(y, zz, out_src, out_len):
    for i in range(y.shape[0]):
        best, best_p = 0, -1
        for p in range(zz.shape[0]):
            l = 0
            while i + l < y.shape[0] and p + l < zz.shape[0] and y[i + l] == zz[p + l]:
                l += 1
            if l > best:
                best, best_p = l, p
        out_src[i] = best_p + 1
        out_len[i] = best


def lz77_brute(text: BytesLike) -> Parsing:
    x = as_u8(text)
    src = np.zeros(x.size, dtype=np.int64)
    ln = np.zeros(x.size, dtype=np.int64)
    z = _lz77_brute(x, src, ln)
    return Parsing(src[:z], ln[:z])


def lpf_brute_arrays(text: BytesLike):
    """(src, len) columns; src is 1-based and 0 where len is 0."""
    x = as_u8(text)
    src = np.zeros(x.size, dtype=np.int64)
    ln = np.zeros(x.size, dtype=np.int64)
    _lpf_brute(x, src, ln)
    return src, ln


def lpf_brute(text: BytesLike) -> list[LpfEntry]:
    src, ln = lpf_brute_arrays(text)
    return [LpfEntry(int(s) if l else None, int(l)) for s, l in zip(src, ln)]


def ms_brute(y: BytesLike, z: BytesLike) -> list[MsEntry]:
    ya, za = as_u8(y), as_u8(z)
    src = np.zeros(ya.size, dtype=np.int64)
    ln = np.zeros(ya.size, dtype=np.int64)
    _ms_brute(ya, za, src, ln)
    return [MsEntry(i + 1, int(s) if l else None, int(l)) for i, (s, l) in enumerate(zip(src, ln))]


# ---------------------------------------------------------------- decoding


@njit(cache=True)
def _decode(src, length, out):
    # returns -1 on success, else the failing phrase index; out[0] then holds
    # the failure code (1: bad source, 2: overrun)
    pos = 0
    n = out.shape[0]
    for k in range(src.shape[0]):
        l = length[k]
        if l == 0:
            if pos >= n or src[k] < 0 or src[k] > 255:
                return k, 2 if pos >= n else 1
            out[pos] = src[k]
            pos += 1
        else:
            p = src[k] - 1
            if p < 0 or p >= pos:
                return k, 1
            if pos + l > n:
                return k, 2
            for t in range(l):
                out[pos + t] = out[p + t]
            pos += l
    if pos != n:
        return src.shape[0], 2
    return -1, 0


def decode(parsing: Parsing, n: Optional[int] = None) -> bytes:
    """Rebuild the text.  Overlapping copies are expanded symbol by symbol."""
    if n is None:
        if np.any(parsing.length < 0):
            bad = int(np.flatnonzero(parsing.length < 0)[0])
            raise DecodeError(bad, "negative length")
        n = parsing.text_length()
    out = np.zeros(n, dtype=np.uint8)
    k, code = _decode(parsing.src, parsing.length, out)
    if k >= 0:
        if code == 1:
            raise DecodeError(k, "source does not precede the phrase")
        raise DecodeError(k, "phrases do not tile the text")
    return out.tobytes()
