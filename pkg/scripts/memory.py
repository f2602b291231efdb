"""Peak traced allocation of a multi-block run, in bytes per block symbol."""

import argparse
import os
import tempfile
import tracemalloc
from dataclasses import dataclass

import numpy as np

from emlz.config import Config
from emlz.corpora import cere_like, random_text
from emlz.pipeline import parse_file


@dataclass
class MemoryConfig:
    log_blocks: tuple = (16, 20)
    blocks: int = 8


def peak(b: int, mode: int, blocks: int, wd: str) -> tuple[float, int]:
    x = np.concatenate([cere_like(blocks // 2 * b, unit=b // 2, rate=1e-3, seed=1),
                        random_text(blocks // 2 * b, 4, 2)])
    inp = os.path.join(wd, f"m{b}")
    x.tofile(inp)
    cfg = Config(mem=b * (29 if mode == 40 else 28), mode=mode, tmpdir=wd)
    parse_file(inp, inp + ".lz", cfg)
    tracemalloc.start()
    base = tracemalloc.get_traced_memory()[0]
    st = parse_file(inp, inp + ".lz", cfg)
    p = tracemalloc.get_traced_memory()[1] - base
    tracemalloc.stop()
    return p / b, st.peak_struct_bytes


def run(cfg: MemoryConfig):
    wd = tempfile.mkdtemp(prefix="emlz-mem-", dir=os.environ.get("EMLZ_TMPDIR"))
    print(f"{'b':>10} {'mode':>5} {'peak/b':>8} {'limit/b':>8} {'resident structs/b':>19}")
    for k in cfg.log_blocks:
        b = 1 << k
        for mode, limit in ((40, 29 + (1 << 20) / b), (32, 28)):
            p, structs = peak(b, mode, cfg.blocks, wd)
            print(f"{'2^' + str(k):>10} {mode:>5} {p:>8.2f} {limit:>8.2f} {structs / b:>19.2f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--log-blocks", default="16,20")
    a = ap.parse_args()
    run(MemoryConfig(tuple(int(v) for v in a.log_blocks.split(","))))
