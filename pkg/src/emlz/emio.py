"""On-disk formats and streaming access.

All integers on disk are little-endian; 40-bit values take 5 bytes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .core import Parsing

SCAN_BUFFER = 256 * 1024
SKIP_RECORD = 10
MAGIC = b"EMLZ77\x00"
VERSION = 1
HEADER = struct.Struct("<7sBBQ")
HEADER_SIZE = HEADER.size


class IoError(OSError):
    pass


class ParseFormatError(ValueError):
    pass


class BadMagic(ParseFormatError):
    pass


class BadVersion(ParseFormatError):
    pass


class BadWidth(ParseFormatError):
    pass


class TruncatedRecord(ParseFormatError):
    pass


class TilingError(ParseFormatError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"phrase {index}: {reason}")
        self.index = index


class SkipLogFull(RuntimeError):
    pass


@dataclass
class IoCounters:
    """Byte totals per category; ``record`` keeps every read for audits."""

    read: dict = field(default_factory=dict)
    written: dict = field(default_factory=dict)
    record: bool = False
    accesses: list = field(default_factory=list)

    def add_read(self, category: str, nbytes: int, tag: str = "", offset: int = -1):
        self.read[category] = self.read.get(category, 0) + nbytes
        if self.record:
            self.accesses.append((category, tag, offset, nbytes))

    def add_write(self, category: str, nbytes: int):
        self.written[category] = self.written.get(category, 0) + nbytes

    def total(self) -> int:
        return sum(self.read.values()) + sum(self.written.values())

    def per_symbol(self, n: int) -> dict:
        n = max(n, 1)
        out = {f"read_{k}": v / n for k, v in self.read.items()}
        out.update({f"write_{k}": v / n for k, v in self.written.items()})
        out["total"] = self.total() / n
        return out

    def as_dict(self) -> dict:
        return {"read": dict(self.read), "written": dict(self.written)}


def _io(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except OSError as e:
            if isinstance(e, IoError):
                raise
            raise IoError(e.errno, f"{fn.__name__}: {e.strerror or e}", getattr(e, "filename", None)) from e
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------- text files


@_io
def reverse_text(src: str, dst: str, buffer: int = 1 << 20, counters: Optional[IoCounters] = None) -> int:
    """Write the bytes of ``src`` in reverse order to ``dst``; returns n."""
    n = os.path.getsize(src)
    buf = bytearray(buffer)
    with open(src, "rb") as fi, open(dst, "wb") as fo:
        end = n
        while end > 0:
            start = max(0, end - buffer)
            fi.seek(start)
            view = memoryview(buf)[: end - start]
            got = fi.readinto(view)
            if got != end - start:
                raise IoError(0, f"short read at offset {start}", src)
            fo.write(bytes(view)[::-1])
            if counters is not None:
                counters.add_read("reverse", got)
                counters.add_write("reverse", got)
            end = start
    return n


class ForwardText:
    """Random-access reads of the forward-order text."""

    def __init__(self, path: str, counters: Optional[IoCounters] = None, category: str = "text_scan"):
        self.path = path
        self.n = os.path.getsize(path)
        self.f = open(path, "rb")
        self.counters = counters
        self.category = category

    @_io
    def read(self, pos: int, k: int, category: Optional[str] = None) -> bytes:
        k = max(0, min(k, self.n - pos))
        if k == 0:
            return b""
        self.f.seek(pos)
        data = self.f.read(k)
        if len(data) != k:
            raise IoError(0, f"short read at offset {pos}", self.path)
        if self.counters is not None:
            self.counters.add_read(category or self.category, k, "fwd", pos)
        return data

    @_io
    def read_into(self, pos: int, out: np.ndarray, category: Optional[str] = None) -> int:
        self.f.seek(pos)
        got = self.f.readinto(memoryview(out))
        if got != out.shape[0]:
            raise IoError(0, f"short read at offset {pos}", self.path)
        if self.counters is not None:
            self.counters.add_read(category or self.category, got, "fwd", pos)
        return got

    def close(self):
        self.f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class BackwardScanner:
    """Yields X[from-1], X[from-2], ..., X[0] by reading the reversed file forward.

    ``segments()`` produces ``(q_hi, seg)`` chunks with ``seg[t] = X[q_hi - t]``;
    the view is reused, so consume a chunk before asking for the next.
    ``jump(q)`` moves the scan ahead (towards lower positions) to ``q``.
    """

    def __init__(self, rev_path: str, n: int, start: int, buffer: int = SCAN_BUFFER,
                 counters: Optional[IoCounters] = None):
        if not 0 <= start <= n:
            raise ValueError(f"scan start {start} outside [0, {n}]")
        self.path = rev_path
        self.n = n
        self.buffer = buffer
        self.counters = counters
        self.offset = n - start  # next file offset to read
        self.f = open(rev_path, "rb") if start else None
        self.buf = np.empty(min(buffer, max(start, 1)), dtype=np.uint8)

    def jump(self, q: int):
        new = self.n - 1 - q
        if new < self.offset:
            raise ValueError("backward scanner can only move ahead")
        self.offset = new

    @_io
    def segments(self) -> Iterator[tuple[int, np.ndarray]]:
        while self.offset < self.n:
            off = self.offset
            k = min(self.buf.shape[0], self.n - off)
            self.f.seek(off)
            view = self.buf[:k]
            got = self.f.readinto(memoryview(view))
            if got != k:
                raise IoError(0, f"short read at offset {off}", self.path)
            if self.counters is not None:
                self.counters.add_read("text_scan", k, "rev", off)
            self.offset = off + k
            yield self.n - 1 - off, view

    def symbols(self) -> Iterator[int]:
        for _, seg in self.segments():
            yield from (int(c) for c in seg)

    def close(self):
        if self.f is not None:
            self.f.close()
            self.f = None


def open_backward_scanner(rev_path: str, start: int, buffer: int = SCAN_BUFFER,
                          counters: Optional[IoCounters] = None) -> BackwardScanner:
    return BackwardScanner(rev_path, os.path.getsize(rev_path), start, buffer, counters)


class MemoryBackwardScanner:
    """In-memory stand-in for :class:`BackwardScanner`."""

    def __init__(self, text, start: int, buffer: int = SCAN_BUFFER):
        self.x = np.frombuffer(bytes(text), dtype=np.uint8)
        self.q = start - 1
        self.buffer = buffer

    def jump(self, q: int):
        if q > self.q:
            raise ValueError("backward scanner can only move ahead")
        self.q = q

    def segments(self):
        while self.q >= 0:
            q_hi = self.q
            lo = max(0, q_hi - self.buffer + 1)
            seg = self.x[lo:q_hi + 1][::-1].copy()
            self.q = lo - 1
            yield q_hi, seg


# ---------------------------------------------------------------- skip log


def _pack40(values: np.ndarray) -> np.ndarray:
    v = np.ascontiguousarray(values, dtype="<u8")
    return v.view(np.uint8).reshape(-1, 8)[:, :5]


def _unpack40(raw: np.ndarray) -> np.ndarray:
    out = np.zeros((raw.shape[0], 8), dtype=np.uint8)
    out[:, :5] = raw
    return out.view("<u8").reshape(-1).astype(np.int64)


def skip_log_capacity(n: int, threshold: int = 40) -> int:
    """Bytes needed for every phrase of length >= threshold; n/4 at the default."""
    return max(-(-n // 4), SKIP_RECORD * (n // threshold))


class SkipPhraseLog:
    """Long phrases written back to front into a file preallocated up front.

    Appends arrive in increasing start order and each one lands just before
    the previous, so reading forward from the fill pointer meets phrases in
    decreasing start order, the order in which the backward scan needs them.
    Positions are 1-based.
    """

    def __init__(self, path: str, n: int, threshold: int = 40, counters: Optional[IoCounters] = None,
                 capacity: Optional[int] = None):
        self.path = path
        self.n = n
        self.threshold = threshold
        self.capacity = skip_log_capacity(n, threshold) if capacity is None else capacity
        self.counters = counters
        self.fill = self.capacity
        self.count = 0
        self.last_start = 0
        self._pending: list[tuple[int, int]] = []
        self.f = open(path, "w+b")
        if self.capacity:
            try:
                os.posix_fallocate(self.f.fileno(), 0, self.capacity)
            except (AttributeError, OSError):
                self.f.truncate(self.capacity)

    def append(self, start: int, length: int):
        if length < self.threshold:
            raise ValueError(f"phrase of length {length} below skip threshold {self.threshold}")
        if start <= self.last_start:
            raise ValueError("skip log appends must have increasing starts")
        used = (self.count + 1) * SKIP_RECORD
        if used > self.capacity:
            raise SkipLogFull(f"skip log capacity {self.capacity} exceeded by record {self.count + 1}")
        self._pending.append((start, length))
        self.count += 1
        self.last_start = start
        if len(self._pending) >= 1024:
            self.flush()

    def append_many(self, starts: np.ndarray, lengths: np.ndarray):
        for s, l in zip(starts.tolist(), lengths.tolist()):
            self.append(s, l)

    @_io
    def flush(self):
        if not self._pending:
            return
        recs = np.array(self._pending[::-1], dtype=np.int64)
        raw = np.empty((recs.shape[0], SKIP_RECORD), dtype=np.uint8)
        raw[:, :5] = _pack40(recs[:, 0])
        raw[:, 5:] = _pack40(recs[:, 1])
        data = raw.tobytes()
        self.fill -= len(data)
        self.f.seek(self.fill)
        self.f.write(data)
        self.f.flush()
        if self.counters is not None:
            self.counters.add_write("skip_log", len(data))
        self._pending.clear()

    def reader(self) -> "SkipLogReader":
        self.flush()
        return SkipLogReader(self)

    def stream(self, upto: int) -> Iterator[tuple[int, int]]:
        """Logged phrases with start < upto, in decreasing start order."""
        rd = self.reader()
        while True:
            st, ln = rd.read_batch(4096)
            for s, l in zip(st.tolist(), ln.tolist()):
                if s < upto:
                    yield s, l
            if st.size < 4096:
                return

    def close(self, delete: bool = False):
        if self.f is not None:
            self.flush()
            self.f.close()
            self.f = None
        if delete and os.path.exists(self.path):
            os.remove(self.path)


def skip_log_append(log: SkipPhraseLog, start: int, length: int):
    log.append(start, length)


def skip_log_stream(log: SkipPhraseLog, upto: int) -> Iterator[tuple[int, int]]:
    return log.stream(upto)


class SkipLogReader:
    def __init__(self, log: SkipPhraseLog):
        self.log = log
        self.pos = log.fill

    @_io
    def read_batch(self, k: int):
        left = (self.log.capacity - self.pos) // SKIP_RECORD
        k = min(k, left)
        if k <= 0:
            z = np.zeros(0, dtype=np.int64)
            return z, z
        self.log.f.seek(self.pos)
        data = self.log.f.read(k * SKIP_RECORD)
        self.pos += len(data)
        if self.log.counters is not None:
            self.log.counters.add_read("skip_log", len(data), "skips", self.pos - len(data))
        raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, SKIP_RECORD)
        return _unpack40(raw[:, :5]), _unpack40(raw[:, 5:])


# ---------------------------------------------------------------- parse output


def encode_records(src: np.ndarray, length: np.ndarray, width: int) -> bytes:
    z = src.shape[0]
    if width == 4:
        rec = np.empty((z, 2), dtype="<u4")
        rec[:, 0] = src
        rec[:, 1] = length
        return rec.tobytes()
    rec = np.empty((z, 10), dtype=np.uint8)
    rec[:, :5] = _pack40(src)
    rec[:, 5:] = _pack40(length)
    return rec.tobytes()


def decode_records(data, width: int):
    raw = np.frombuffer(data, dtype=np.uint8)
    if width == 4:
        rec = raw.view("<u4").reshape(-1, 2).astype(np.int64)
        return rec[:, 0].copy(), rec[:, 1].copy()
    rec = raw.reshape(-1, 10)
    return _unpack40(rec[:, :5]), _unpack40(rec[:, 5:])


class ParseWriter:
    """Streams phrase records after a fixed header."""

    def __init__(self, path: str, n: int, width: int = 5, counters: Optional[IoCounters] = None):
        if width not in (4, 5):
            raise ValueError(f"record width must be 4 or 5, not {width}")
        if width == 4 and n >= 1 << 32:
            raise ValueError("4-byte records need n < 2^32")
        self.path, self.n, self.width, self.counters = path, n, width, counters
        self.z = 0
        self.f = open(path, "wb")
        self._put(HEADER.pack(MAGIC, VERSION, width, n))

    def _put(self, data: bytes):
        self.f.write(data)
        if self.counters is not None:
            self.counters.add_write("output", len(data))

    @_io
    def write(self, src: np.ndarray, length: np.ndarray):
        if src.shape[0]:
            self._put(encode_records(src, length, self.width))
            self.z += src.shape[0]

    def close(self):
        if self.f is not None:
            self.f.close()
            self.f = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@_io
def write_parse(path: str, parsing: Parsing, n: Optional[int] = None, width: int = 5,
                counters: Optional[IoCounters] = None) -> int:
    n = parsing.text_length() if n is None else n
    with ParseWriter(path, n, width, counters) as w:
        w.write(parsing.src, parsing.length)
    return os.path.getsize(path)


def read_header(data: bytes):
    if len(data) < HEADER_SIZE:
        if not MAGIC.startswith(data[: len(MAGIC)]):
            raise BadMagic("not an EMLZ77 file")
        raise TruncatedRecord(f"header needs {HEADER_SIZE} bytes, file has {len(data)}")
    magic, version, width, n = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic("not an EMLZ77 file")
    if version != VERSION:
        raise BadVersion(f"unsupported format version {version}")
    if width not in (4, 5):
        raise BadWidth(f"unsupported integer width {width}")
    return version, width, n


def check_tiling(parsing: Parsing, n: int):
    length = parsing.length
    lit = length == 0
    bad = np.flatnonzero(lit & ((parsing.src < 0) | (parsing.src > 255)))
    if bad.size:
        raise TilingError(int(bad[0]), "literal symbol outside [0, 255]")
    starts = parsing.starts()
    bad = np.flatnonzero(~lit & ((parsing.src < 1) | (parsing.src >= starts)))
    if bad.size:
        raise TilingError(int(bad[0]), "copy source does not precede the phrase")
    total = parsing.text_length()
    if total != n:
        ends = starts + parsing.spans() - 1
        over = np.flatnonzero(ends > n)
        k = int(over[0]) if over.size else parsing.z
        raise TilingError(k, f"phrases cover {total} symbols, header says {n}")


@_io
def read_parse(path: str, counters: Optional[IoCounters] = None, with_n: bool = False):
    with open(path, "rb") as f:
        data = f.read()
    if counters is not None:
        counters.add_read("output", len(data))
    _, width, n = read_header(data)
    body = len(data) - HEADER_SIZE
    if body % (2 * width):
        raise TruncatedRecord(f"record {body // (2 * width)} is truncated")
    src, length = decode_records(data[HEADER_SIZE:], width)
    parsing = Parsing(src, length)
    check_tiling(parsing, n)
    return (parsing, n) if with_n else parsing
