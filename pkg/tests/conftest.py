import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=200,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _scratch_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EMLZ_TMPDIR", str(tmp_path))
    return tmp_path


def texts(max_size=300, alphabets=(1, 2, 4, 256)):
    """Byte strings over a small alphabet, biased towards repetition."""

    @st.composite
    def build(draw):
        sigma = draw(st.sampled_from(alphabets))
        sym = st.integers(0, sigma - 1)
        kind = draw(st.sampled_from(["random", "repeat"]))
        if kind == "random":
            return bytes(draw(st.lists(sym, max_size=max_size)))
        unit = draw(st.lists(sym, min_size=1, max_size=12))
        n = draw(st.integers(0, max_size))
        x = bytearray((unit * (n // len(unit) + 1))[:n])
        for _ in range(draw(st.integers(0, 3))):
            if x:
                x[draw(st.integers(0, len(x) - 1))] = draw(sym)
        return bytes(x)

    return build()


def write(path, data) -> str:
    with open(path, "wb") as f:
        f.write(bytes(data))
    return str(path)


def as_bytes(x) -> bytes:
    return np.asarray(x, dtype=np.uint8).tobytes() if not isinstance(x, (bytes, bytearray)) else bytes(x)


def phrase_src_ok(text: bytes, parsing) -> bool:
    """Every copy's source substring equals the phrase's text."""
    pos = 0
    for s, l in zip(parsing.src.tolist(), parsing.length.tolist()):
        if l == 0:
            if text[pos] != s:
                return False
            pos += 1
            continue
        if not (1 <= s <= pos) or text[s - 1:s - 1 + l] != text[pos:pos + l]:
            return False
        pos += l
    return pos == len(text)


ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """Collects one-line criterion verdicts for the terminal summary."""

    def put(criterion: str, ok: bool, detail: str):
        ACCEPTANCE.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return put


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
