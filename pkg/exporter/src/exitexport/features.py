"""Deterministic hashed bag-of-words features.

Tokens hash with crc32 (stable across runs, platforms, and Python's hash
randomization) into a fixed number of count buckets, then rows are
l2-normalized.
"""

from __future__ import annotations

import zlib

import numpy as np

DIM = 256


def featurize(texts: list[str], dim: int = DIM) -> np.ndarray:
    out = np.zeros((len(texts), dim), dtype=np.float32)
    for i, text in enumerate(texts):
        for token in text.lower().split():
            out[i, zlib.crc32(token.encode("utf-8")) % dim] += 1.0
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    np.divide(out, norms, out=out, where=norms > 0)
    return out
