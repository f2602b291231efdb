"""Synthetic inputs for tests and experiments."""

from __future__ import annotations

import numpy as np

DNA = np.frombuffer(b"ACGT", dtype=np.uint8)


def random_text(n: int, sigma: int = 256, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    if sigma >= 256:
        return np.frombuffer(rng.bytes(n), dtype=np.uint8).copy()
    return rng.integers(0, sigma, n, dtype=np.uint8)


def random_dna(n: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return DNA[rng.integers(0, 4, n)]


def mutate(x: np.ndarray, rate: float, rng, alphabet: np.ndarray = DNA) -> np.ndarray:
    x = x.copy()
    k = rng.binomial(x.size, rate)
    pos = rng.integers(0, x.size, k)
    x[pos] = alphabet[rng.integers(0, alphabet.size, k)]
    return x


def cere_like(n: int, unit: int = 1 << 20, rate: float = 1e-4, seed: int = 0) -> np.ndarray:
    """Copies of one random DNA string, each copy with point mutations."""
    rng = np.random.default_rng(seed)
    base = random_dna(unit, seed)
    parts, total = [], 0
    while total < n:
        parts.append(mutate(base, rate, rng))
        total += unit
    return np.concatenate(parts)[:n]


def de_bruijn(sigma: int, k: int) -> np.ndarray:
    """De Bruijn sequence B(sigma, k) by the standard Lyndon-word recursion."""
    a = [0] * sigma * k
    seq: list[int] = []

    def db(t, p):
        if t > k:
            if k % p == 0:
                seq.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, sigma):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return np.array(seq, dtype=np.uint8)


def mutated_repeat(n: int, period: int, sigma: int, mutations: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    base = rng.integers(0, sigma, period, dtype=np.uint8)
    x = np.tile(base, n // period + 1)[:n].copy()
    pos = rng.integers(0, n, mutations)
    x[pos] = rng.integers(0, sigma, mutations, dtype=np.uint8)
    return x


def fuzz_text(n: int, seed: int) -> np.ndarray:
    """Mixture of random runs, repeats with edits, and long copies."""
    rng = np.random.default_rng(seed)
    sigma = int(rng.choice([2, 4, 26, 256]))
    out = np.empty(n, dtype=np.uint8)
    i = 0
    while i < n:
        kind = rng.integers(0, 4)
        k = min(n - i, int(rng.integers(1, max(2, n // 4))))
        if kind == 0 or i == 0:
            out[i:i + k] = rng.integers(0, sigma, k, dtype=np.uint8)
        elif kind == 1:
            src = int(rng.integers(0, i))
            out[i:i + k] = np.resize(out[src:i], k)  # overlapping copy
        elif kind == 2:
            src = int(rng.integers(0, i))
            w = min(k, i - src)
            out[i:i + w] = mutate(out[src:src + w], 1e-3, rng, np.arange(sigma, dtype=np.uint8))
            k = w
        else:
            out[i:i + k] = rng.integers(0, sigma)
        i += k
    return out
