"""Average phrase length on a cere-like corpus vs random text, and the effect of skipping."""

import argparse
import math
import os
import tempfile
from dataclasses import dataclass

from emlz.config import Config, parse_size
from emlz.corpora import cere_like, random_text
from emlz.pipeline import parse_file


@dataclass
class RepetitiveConfig:
    size: int = 64 << 20
    unit: int = 1 << 20
    rate: float = 1e-4
    blocks: int = 4
    seed: int = 0


def run(cfg: RepetitiveConfig):
    wd = tempfile.mkdtemp(prefix="emlz-rep-", dir=os.environ.get("EMLZ_TMPDIR"))
    b = math.ceil(cfg.size / cfg.blocks * 1.01)
    files = {"cere": cere_like(cfg.size, cfg.unit, cfg.rate, cfg.seed), "random": random_text(cfg.size, 256, cfg.seed)}
    print(f"{'corpus':>8} {'skip':>5} {'z':>10} {'n/z':>9} {'us/sym':>8} {'skips':>7} {'scan B/sym':>11}")
    nz = {}
    for name, x in files.items():
        path = os.path.join(wd, name)
        x.tofile(path)
        for skip in ((True, False) if name == "cere" else (True,)):
            st = parse_file(path, path + ".lz", Config(block=b, skip=skip, tmpdir=wd))
            nz[name] = st.avg_phrase
            print(f"{name:>8} {str(skip):>5} {st.z:>10} {st.avg_phrase:>9.1f} {st.seconds * 1e6 / cfg.size:>8.3f} "
                  f"{st.skips:>7} {st.io['read']['text_scan'] / cfg.size:>11.3f}")
    print(f"n/z ratio cere/random: {nz['cere'] / nz['random']:.0f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", default="64M")
    ap.add_argument("--unit", default="1M")
    ap.add_argument("--rate", type=float, default=1e-4)
    ap.add_argument("--blocks", type=int, default=4)
    a = ap.parse_args()
    run(RepetitiveConfig(parse_size(a.size), parse_size(a.unit), a.rate, a.blocks))
