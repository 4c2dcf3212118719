"""Tokenization and the hashed n-gram utterance encoder."""
from __future__ import annotations

import re
from functools import lru_cache

import numpy as np

_SPLIT = re.compile(r"[^0-9a-z]+")

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on runs of non-alphanumerics."""
    return [t for t in _SPLIT.split(text.lower()) if t]


def fnv1a_64(s: str) -> int:
    h = FNV_OFFSET
    for byte in s.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def _features(token: str):
    yield token
    for i in range(len(token) - 2):
        yield token[i:i + 3]


@lru_cache(maxsize=200_000)
def _encode_cached(text: str, dim: int) -> bytes:
    vec = np.zeros(dim)
    tokens = tokenize(text)
    if not tokens:
        return vec.tobytes()
    for tok in tokens:
        for feat in _features(tok):
            h = fnv1a_64(feat)
            vec[h % dim] += -1.0 if h >> 63 else 1.0
    vec /= len(tokens)
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec.tobytes()


def encode_text_hashed(text: str, dim: int) -> np.ndarray:
    """Signed feature hashing of tokens and their character trigrams.

    Each token and each of its character trigrams is hashed with 64-bit
    FNV-1a; the bucket is ``hash % dim`` and the sign is taken from bit 63.
    The accumulated vector is mean-pooled over tokens and L2-normalized, so
    the result has norm exactly 1, or is all zeros for token-free text.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return np.frombuffer(_encode_cached(text, int(dim)), dtype=np.float64).copy()
