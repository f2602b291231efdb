"""External-memory LZ77 factorization (EM-LZscan)."""

__version__ = "0.1.0"
