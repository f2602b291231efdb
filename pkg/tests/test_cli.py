import json
import os

import numpy as np

from conftest import write
from emlz.cli import EXIT_FAIL, EXIT_FORMAT, EXIT_OK, EXIT_USAGE, main, verify_parse
from emlz.core import Parsing, Phrase, lz77_brute
from emlz.corpora import fuzz_text
from emlz.emio import read_parse, write_parse


def test_parse_decode_verify(tmp_path, capsys):
    x = fuzz_text(4000, 8).tobytes()
    inp = write(tmp_path / "in", x)
    js = str(tmp_path / "s.json")
    assert main(["parse", inp, "--mem", "29K", "--buffer", "1K", "--stats-json", js]) == EXIT_OK
    stats = json.load(open(js))["stats"]
    assert stats["n"] == 4000 and stats["blocks"] >= 4
    assert main(["decode", inp + ".lz", "-o", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out").read_bytes() == x
    assert main(["verify", inp, inp + ".lz"]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_reverse_command(tmp_path):
    inp = write(tmp_path / "in", b"abc")
    assert main(["reverse", inp]) == EXIT_OK
    assert (tmp_path / "in.rev").read_bytes() == b"cba"


def test_verify_catches_bad_parses(tmp_path, capsys):
    x = b"abcabcabcx"
    inp = write(tmp_path / "in", x)
    lz = str(tmp_path / "a.lz")
    p = lz77_brute(x)
    ln = p.length.copy()
    ln[3] -= 1  # corrupted length: tiling breaks
    write_parse(lz, Parsing(p.src.copy(), ln), len(x))
    assert main(["verify", inp, lz]) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out
    # valid but not greedy: copy of 3 where 6 was possible
    lazy = Parsing.from_phrases([Phrase.literal(97), Phrase.literal(98), Phrase.literal(99),
                                 Phrase.copy(1, 3), Phrase.copy(1, 3), Phrase.literal(120)])
    rep = verify_parse(x, lazy)
    assert not rep.ok and rep.checks["maximality"] == "FAIL" and rep.checks["round_trip"] == "ok"
    wrong = Parsing.from_phrases([Phrase.literal(97), Phrase.literal(98), Phrase.literal(99),
                                  Phrase.copy(2, 6), Phrase.literal(120)])
    assert verify_parse(x, wrong).checks["sources"] == "FAIL"


def test_error_exit_codes(tmp_path):
    inp = write(tmp_path / "in", b"hello")
    junk = write(tmp_path / "junk.lz", b"not a parse at all")
    assert main(["decode", junk]) == EXIT_FORMAT
    assert main(["parse", inp, "--mem", "10"]) == EXIT_USAGE


def test_empty_input(tmp_path):
    inp = write(tmp_path / "in", b"")
    assert main(["parse", inp]) == EXIT_OK
    assert os.path.getsize(inp + ".lz") == 17
    assert read_parse(inp + ".lz").z == 0
    assert main(["verify", inp, inp + ".lz"]) == EXIT_OK


def test_bench_command(tmp_path, capsys):
    inp = write(tmp_path / "in", fuzz_text(3000, 2).tobytes())
    js = str(tmp_path / "b.json")
    assert main(["bench", inp, "--prefix", "0.5,1.0", "--mem", "29K,58K", "--stats-json", js]) == EXIT_OK
    rows = json.load(open(js))
    assert len(rows) == 4 and all(r["z"] > 0 for r in rows)
