"""Document data model and streaming corpus I/O (JSON lines, UTF-8)."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, TextIO

logger = logging.getLogger(__name__)

SOURCES = ("web", "synthetic", "code", "textbook", "translated_code")


class CorpusError(Exception):
    pass


class ConfigurationError(CorpusError):
    pass


def doc_id(source: str, text: str) -> str:
    """Stable 128-bit content hash of (source tag, text)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(source.encode("utf-8"))
    h.update(b"\x00")
    h.update(text.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class Document:
    id: str
    source: str
    text: str
    meta: dict = field(default_factory=dict)
    token_count: Optional[int] = None

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if not self.text.strip():
            raise ValueError("document text must be non-empty")
        if self.token_count is not None and self.token_count < 0:
            raise ValueError("token_count must be non-negative")

    @classmethod
    def create(cls, source: str, text: str, meta: Optional[dict] = None,
               token_count: Optional[int] = None) -> "Document":
        return cls(id=doc_id(source, text), source=source, text=text,
                   meta=dict(meta or {}), token_count=token_count)


@dataclass(frozen=True)
class TokenCounter:
    """Pluggable token counting: cheap whitespace scheme by default, optional
    greedy longest-match over a user-supplied vocabulary for BPE-style counts."""

    scheme: str = "whitespace"
    vocab: Optional[frozenset] = None

    def __post_init__(self):
        if self.scheme not in ("whitespace", "bpe"):
            raise ConfigurationError(f"unknown token scheme {self.scheme!r}")
        if self.scheme == "bpe" and not self.vocab:
            raise ConfigurationError("bpe scheme requires a vocabulary")

    @classmethod
    def from_vocab_file(cls, path: str) -> "TokenCounter":
        with open(path, encoding="utf-8") as fh:
            vocab = frozenset(line.rstrip("\n") for line in fh if line.rstrip("\n"))
        return cls(scheme="bpe", vocab=vocab)

    def count(self, text: str) -> int:
        if self.scheme == "whitespace":
            return len(text.split())
        # greedy longest-match segmentation; unmatched characters count as
        # single tokens so the count is defined for any input
        max_len = max(len(v) for v in self.vocab)
        n = 0
        for word in text.split():
            i = 0
            while i < len(word):
                for ln in range(min(max_len, len(word) - i), 0, -1):
                    if word[i : i + ln] in self.vocab:
                        i += ln
                        break
                else:
                    i += 1
                n += 1
        return n


def count_tokens(counter: TokenCounter, text: str) -> int:
    return counter.count(text)


def _doc_from_record(rec: dict, source: Optional[str]) -> Document:
    text = rec["text"]
    if not isinstance(text, str) or not text.strip():
        raise ValueError("empty or non-string text")
    src = rec.get("source", source)
    if src is None:
        raise ValueError("record has no source and none was supplied")
    return Document(
        id=rec.get("id") or doc_id(src, text),
        source=src,
        text=text,
        meta=dict(rec.get("meta") or {}),
        token_count=rec.get("token_count"),
    )


def read_corpus(path: str, source: Optional[str] = None,
                skip_log: Optional[list] = None) -> Iterator[Document]:
    """Stream documents from a JSONL file.

    Malformed lines (bad JSON, missing/empty text, unknown source) are
    counted and skipped; pass ``skip_log`` to collect (line_no, reason).
    """
    with open(path, encoding="utf-8") as fh:
        skipped = 0
        for line_no, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict) or "text" not in rec:
                    raise ValueError("record missing text field")
                yield _doc_from_record(rec, source)
            except (ValueError, KeyError, TypeError) as exc:
                skipped += 1
                logger.warning("skipping line %d of %s: %s", line_no, path, exc)
                if skip_log is not None:
                    skip_log.append((line_no, str(exc)))
        if skipped:
            logger.info("%s: skipped %d malformed lines", path, skipped)


def doc_to_record(doc: Document) -> dict:
    rec = {"id": doc.id, "source": doc.source, "text": doc.text, "meta": doc.meta}
    if doc.token_count is not None:
        rec["token_count"] = doc.token_count
    return rec


def write_corpus(docs: Iterable[Document], path: str) -> int:
    """Write documents as JSONL; returns the document count.

    Writes to a temp file and renames, so a failed write never leaves a
    partial corpus at ``path``.
    """
    tmp = path + ".tmp"
    count = 0
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps(doc_to_record(doc), ensure_ascii=False))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return count


def file_hash(path: str) -> str:
    h = hashlib.blake2b(digest_size=16)
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
