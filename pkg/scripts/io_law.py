"""Text-scan I/O per symbol against the (d+1)/2 law for d blocks."""

import argparse
import math
import os
import tempfile
from dataclasses import dataclass

from emlz.config import Config, parse_size
from emlz.corpora import random_text
from emlz.pipeline import parse_file


@dataclass
class IoLawConfig:
    size: int = 64 << 20
    blocks: tuple = (4, 8, 16)
    sigma: int = 256
    seed: int = 0


def run(cfg: IoLawConfig):
    wd = tempfile.mkdtemp(prefix="emlz-iolaw-", dir=os.environ.get("EMLZ_TMPDIR"))
    inp = os.path.join(wd, "random")
    random_text(cfg.size, cfg.sigma, cfg.seed).tofile(inp)
    print(f"{'d':>4} {'blocks':>6} {'scan B/sym':>11} {'(d+1)/2':>8} {'error':>7} {'seconds':>8}")
    for d in cfg.blocks:
        b = math.ceil(cfg.size / d * 1.01)
        st = parse_file(inp, inp + ".lz", Config(block=b, tmpdir=wd))
        got = st.io["read"]["text_scan"] / cfg.size
        want = (d + 1) / 2
        print(f"{d:>4} {st.blocks:>6} {got:>11.3f} {want:>8.2f} {100 * (got / want - 1):>6.1f}% {st.seconds:>8.1f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", default="64M")
    ap.add_argument("--blocks", default="4,8,16")
    ap.add_argument("--sigma", type=int, default=256)
    a = ap.parse_args()
    run(IoLawConfig(parse_size(a.size), tuple(int(v) for v in a.blocks.split(",")), a.sigma))
