"""Shared word tokenization and hashing used by the classifier and shingling."""

from __future__ import annotations

import string

_STRIP_CHARS = string.punctuation + string.whitespace

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def word_tokens(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Tokens that are pure punctuation survive as-is (stripping would empty them).
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_STRIP_CHARS)
        if not tok:
            tok = raw
        out.append(tok)
    return out


def ngram_hashes(tokens: list[str], n: int) -> list[int]:
    """FNV-1a hashes of all n-grams (joined with a space) of the token list."""
    if len(tokens) < n:
        return []
    return [
        fnv1a_64(" ".join(tokens[i : i + n]).encode("utf-8"))
        for i in range(len(tokens) - n + 1)
    ]
