"""Block-by-block driver: index, scan, invert, merge, parse, resolve tails."""

from __future__ import annotations

import os
import shutil
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .config import Config
from .core import Parsing, as_u8
from .emio import (BackwardScanner, ForwardText, IoCounters, ParseWriter, SkipPhraseLog,
                   read_parse, reverse_text)
from .index import BlockIndex
from .longphrase import resolve_long_phrase
from .ms import InvertedMs, finalize_inversion, scan_prefix
from .parser import (LeftmostTracker, ParseInvariantError, _parse_block, block_phrases,
                     merge_lpf)


@dataclass
class RunStats:
    n: int = 0
    z: int = 0
    block_size: int = 0
    mode: int = 40
    blocks: int = 0
    restarts: int = 0
    handoffs: int = 0
    long_phrases: list = field(default_factory=list)  # (start, len, rounds)
    parsed_positions: int = 0
    scan_steps: int = 0
    skips: int = 0
    skipped_positions: int = 0
    reread_bytes: int = 0
    peak_struct_bytes: int = 0
    seconds: float = 0.0
    io: dict = field(default_factory=dict)
    accesses: Optional[list] = field(default=None, repr=False)

    @property
    def avg_phrase(self) -> float:
        return self.n / self.z if self.z else 0.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("accesses")
        d["n_over_z"] = self.avg_phrase
        d["io_per_symbol"] = {k: v / max(self.n, 1) for k, v in _flat_io(self.io).items()}
        return d


def _flat_io(io: dict) -> dict:
    out = {}
    for kind in ("read", "written"):
        for k, v in io.get(kind, {}).items():
            out[f"{kind}_{k}"] = v
    return out


def temp_paths(input_path: str, output_path: str, tmpdir: Optional[str] = None) -> dict:
    stem = output_path[:-3] if output_path.endswith(".lz") else output_path
    paths = {"lz": stem + ".lz", "skips": stem + ".skips", "cand": stem + ".cand",
             "rev": input_path + ".rev"}
    if tmpdir:
        for k in ("skips", "cand", "rev"):
            paths[k] = os.path.join(tmpdir, os.path.basename(paths[k]))
    return paths


def ensure_reversed(input_path: str, rev_path: str, counters: Optional[IoCounters] = None) -> str:
    n = os.path.getsize(input_path)
    if (os.path.exists(rev_path) and os.path.getsize(rev_path) == n
            and os.path.getmtime(rev_path) >= os.path.getmtime(input_path)):
        return rev_path
    reverse_text(input_path, rev_path, counters=counters)
    return rev_path


class _Emitter:
    """Writes phrase columns and logs the long ones for the skipping trick."""

    def __init__(self, writer: ParseWriter, log: Optional[SkipPhraseLog], threshold: int):
        self.writer, self.log, self.threshold = writer, log, threshold
        self.pos = 0  # next text position (0-based)
        self.z = 0

    def emit(self, src: np.ndarray, ln: np.ndarray):
        if src.shape[0] == 0:
            return
        self.writer.write(src, ln)
        span = np.maximum(ln, 1)
        if self.log is not None:
            long = np.flatnonzero(ln >= self.threshold)
            if long.size:
                starts = self.pos + np.cumsum(span) - span
                self.log.append_many(starts[long] + 1, ln[long])
        self.pos += int(span.sum())
        self.z += src.shape[0]


def parse_file(input_path: str, output_path: str, config: Optional[Config] = None) -> RunStats:
    """Factorize ``input_path`` into ``<output>.lz``; returns run statistics."""
    cfg = config or Config()
    t0 = time.perf_counter()
    n = os.path.getsize(input_path)
    cfg.check_input(n)
    b = cfg.block_size
    paths = temp_paths(input_path, output_path, cfg.tmpdir)
    counters = IoCounters(record=cfg.record_access)
    stats = RunStats(n=n, block_size=b, mode=cfg.mode)
    if n:
        ensure_reversed(input_path, paths["rev"], counters)
    writer = ParseWriter(paths["lz"], n, cfg.width, counters)
    log = SkipPhraseLog(paths["skips"], n, cfg.skip_threshold, counters) if cfg.skip else None
    fwd = ForwardText(input_path, counters, "text_scan") if n else None
    ok = False
    try:
        em = _Emitter(writer, log, cfg.skip_threshold)
        tracker = LeftmostTracker()
        chunk_rows = max(1024, b // 64)
        log_batch = max(64, min(4096, b // 256))
        s = 0
        block = None
        while s < n:
            bp = min(b, n - s)
            stats.blocks += 1
            block = None
            block = np.empty(bp, dtype=np.uint8)
            fwd.read_into(s, block)
            idx = BlockIndex(block, s, cfg.mode)
            inv = InvertedMs.empty(bp, cfg.mode)
            stats.peak_struct_bytes = max(stats.peak_struct_bytes, idx.nbytes() + inv.nbytes())
            if s > 0:
                scanner = BackwardScanner(paths["rev"], n, s, cfg.buffer, counters)
                try:
                    st = scan_prefix(idx, scanner, log.reader() if log is not None else None, inv,
                                     read_forward=fwd.read, log_batch=log_batch)[1]
                finally:
                    scanner.close()
                    scanner = None
                stats.scan_steps += st.emitted
                stats.skips += st.skips
                stats.skipped_positions += st.skipped_positions
                stats.reread_bytes += st.reread_bytes
            idx.drop_rank()
            finalize_inversion(inv, idx)
            merge_lpf(inv, idx)
            final = s + bp >= n
            z, tj, tl, ts, err = _parse_block(block, inv.ev_len, inv.ev_lo, inv.ev_hi, s, final,
                                              tracker.first_seen)
            if err >= 0:
                raise ParseInvariantError(f"literal at {s + err} for a symbol seen before")
            for lo in range(0, z, chunk_rows):
                em.emit(*block_phrases(inv, z, lo, min(z, lo + chunk_rows)))
            stats.parsed_positions += bp
            del idx, inv
            if tj < 0:
                s += bp
                continue
            t = s + int(tj)
            if 2 * tl <= b:
                stats.restarts += 1
                s = t
                continue
            stats.handoffs += 1
            del block
            res = resolve_long_phrase(t, b // 2, _Category(fwd, "long_phrase"), paths["cand"],
                                      counters, cfg.buffer)
            if res.len < tl:
                raise ParseInvariantError(f"long phrase at {t} resolved shorter than its block witness")
            stats.long_phrases.append((t, res.len, res.rounds))
            em.emit(np.array([res.src + 1], dtype=np.int64), np.array([res.len], dtype=np.int64))
            s = t + res.len
        if em.pos != n:
            raise ParseInvariantError(f"phrases cover {em.pos} of {n} symbols")
        stats.z = em.z
        ok = True
    finally:
        writer.close()
        if fwd is not None:
            fwd.close()
        if log is not None:
            log.close(delete=not cfg.keep_temp)
        if not ok and os.path.exists(paths["lz"]):
            os.remove(paths["lz"])
    stats.seconds = time.perf_counter() - t0
    stats.io = counters.as_dict()
    if cfg.record_access:
        stats.accesses = counters.accesses
    return stats


class _Category:
    """ForwardText view that books its reads under another category."""

    def __init__(self, fwd: ForwardText, category: str):
        self.fwd, self.category, self.n = fwd, category, fwd.n

    def read_into(self, pos, out, category=None):
        return self.fwd.read_into(pos, out, self.category)

    def read(self, pos, k, category=None):
        return self.fwd.read(pos, k, self.category)


def parse_bytes(text, config: Optional[Config] = None, workdir: Optional[str] = None):
    """Run the on-disk pipeline on an in-memory text; returns (Parsing, RunStats)."""
    data = as_u8(text).tobytes()
    own = workdir is None
    wd = workdir or tempfile.mkdtemp(prefix="emlz-", dir=os.environ.get("EMLZ_TMPDIR"))
    try:
        inp = os.path.join(wd, "input")
        with open(inp, "wb") as f:
            f.write(data)
        cfg = config or Config(block=max(16, len(data)))
        if cfg.tmpdir is not None and own:
            cfg = Config(**{**cfg.__dict__, "tmpdir": wd})
        stats = parse_file(inp, os.path.join(wd, "out.lz"), cfg)
        return read_parse(os.path.join(wd, "out.lz")), stats
    finally:
        if own:
            shutil.rmtree(wd, ignore_errors=True)
