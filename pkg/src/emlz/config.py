"""Run configuration."""

from __future__ import annotations

import os
import re
from dataclasses import asdict, dataclass, field
from typing import Optional

from .emio import SCAN_BUFFER
from .index import ConfigError

MIN_BLOCK = 16
BYTES_PER_SYMBOL = {40: 29, 32: 28}
TMPDIR_ENV = "EMLZ_TMPDIR"

_UNITS = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30, "t": 1 << 40}


def parse_size(text) -> int:
    """'64M', '1.5g', '4096' -> bytes (binary units)."""
    if isinstance(text, int):
        return text
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([kmgt]?)(?:i?b)?\s*", str(text).lower())
    if not m:
        raise ConfigError(f"cannot parse size {text!r}")
    return int(float(m.group(1)) * _UNITS[m.group(2)])


@dataclass
class Config:
    mem: int = 1 << 30
    mode: int = 40
    block: Optional[int] = None
    buffer: int = SCAN_BUFFER
    skip_threshold: int = 40
    skip: bool = True
    keep_temp: bool = False
    tmpdir: Optional[str] = field(default_factory=lambda: os.environ.get(TMPDIR_ENV))
    record_access: bool = False

    def __post_init__(self):
        self.mem = parse_size(self.mem)
        if self.block is not None:
            self.block = parse_size(self.block)
        self.buffer = parse_size(self.buffer)
        if self.mode not in BYTES_PER_SYMBOL:
            raise ConfigError(f"mode must be 32 or 40, not {self.mode}")
        if self.skip_threshold < 1:
            raise ConfigError("skip threshold must be positive")
        if self.buffer < 1:
            raise ConfigError("scan buffer must be positive")
        if self.block_size < MIN_BLOCK:
            raise ConfigError(f"block size {self.block_size} below {MIN_BLOCK}; raise --mem")

    @property
    def block_size(self) -> int:
        if self.block is not None:
            return self.block
        return self.mem // BYTES_PER_SYMBOL[self.mode]

    @property
    def width(self) -> int:
        return 4 if self.mode == 32 else 5

    def check_input(self, n: int):
        if self.mode == 32 and n >= 1 << 32:
            raise ConfigError("32-bit mode needs n < 2^32")
        if n >= 1 << 40:
            raise ConfigError("inputs must be shorter than 2^40 symbols")

    @classmethod
    def for_blocks(cls, n: int, d: int, mode: int = 40, **kw) -> "Config":
        """Memory budget giving exactly ``d`` blocks of slack-free size on n symbols."""
        b = max(MIN_BLOCK, -(-n // d))
        return cls(mem=b * BYTES_PER_SYMBOL[mode], mode=mode, **kw)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["block_size"] = self.block_size
        return d
