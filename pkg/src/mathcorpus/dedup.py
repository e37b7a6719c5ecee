"""Exact dedup and 13-gram benchmark decontamination.

Documents and benchmark questions are shingled into hashed 13-token windows;
a document is removed when a question occurs verbatim inside it or when the
shingle-set similarity exceeds the threshold. An inverted shingle index
prunes candidate pairs without changing the decision (every pair sharing a
shingle is a candidate, and candidates are scored exactly).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .corpus import Document
from .tokenizers import ngram_hashes, word_tokens

SHINGLE_N = 13
DEFAULT_THRESHOLD = 0.6


@dataclass(frozen=True)
class ShingleSet:
    doc_id: str
    shingles: frozenset
    token_count: int

    @classmethod
    def from_text(cls, doc_id: str, text: str, n: int = SHINGLE_N) -> "ShingleSet":
        tokens = word_tokens(text)
        return cls(doc_id=doc_id, shingles=frozenset(ngram_hashes(tokens, n)),
                   token_count=len(tokens))


@dataclass(frozen=True)
class BenchmarkQuestion:
    id: str
    text: str
    shingles: ShingleSet


@dataclass(frozen=True)
class BenchmarkSet:
    name: str
    questions: tuple

    @classmethod
    def from_texts(cls, name: str, items: Iterable[tuple[str, str]]) -> "BenchmarkSet":
        questions = []
        for qid, text in items:
            if not text.strip():
                raise ValueError(f"benchmark question {qid} is empty")
            questions.append(BenchmarkQuestion(
                id=qid, text=text, shingles=ShingleSet.from_text(qid, text)))
        return cls(name=name, questions=tuple(questions))

    @classmethod
    def from_file(cls, path: str, name: Optional[str] = None) -> "BenchmarkSet":
        """JSONL with one {"id": ..., "text": ...} question per line."""
        items = []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                if not line.strip():
                    continue
                rec = json.loads(line)
                items.append((str(rec.get("id", i)), rec["text"]))
        return cls.from_texts(name or path, items)


def exact_dedup(docs: Iterable[Document]) -> Iterator[Document]:
    """Keep the first occurrence of each exact text (per source)."""
    seen: set[str] = set()
    for doc in docs:
        key = hashlib.blake2b(doc.text.encode("utf-8"), digest_size=16).digest()
        if key in seen:
            continue
        seen.add(key)
        yield doc


def similarity_13gram(a: ShingleSet, b: ShingleSet, mode: str = "jaccard") -> float:
    if not a.shingles or not b.shingles:
        return 0.0
    inter = len(a.shingles & b.shingles)
    if mode == "jaccard":
        return inter / len(a.shingles | b.shingles)
    if mode == "containment":
        return inter / min(len(a.shingles), len(b.shingles))
    raise ValueError(f"unknown similarity mode {mode!r}")


@dataclass
class CandidateIndex:
    """Inverted index shingle hash -> question ids (superset-complete)."""

    by_shingle: dict = field(default_factory=dict)
    questions: dict = field(default_factory=dict)

    @classmethod
    def build(cls, bench: BenchmarkSet) -> "CandidateIndex":
        index = cls()
        for q in bench.questions:
            index.questions[q.id] = q
            for h in q.shingles.shingles:
                index.by_shingle.setdefault(h, set()).add(q.id)
        return index

    def query(self, shingles: ShingleSet) -> set:
        candidates: set = set()
        for h in shingles.shingles:
            hits = self.by_shingle.get(h)
            if hits:
                candidates |= hits
        return candidates


@dataclass(frozen=True)
class RemovalRecord:
    doc_id: str
    question_id: str
    score: float
    reason: str  # exact | ngram


def check_document(doc: Document, bench: BenchmarkSet, threshold: float,
                   mode: str, index: Optional[CandidateIndex] = None) \
        -> Optional[RemovalRecord]:
    """First triggering removal, or None if the document is clean."""
    for q in bench.questions:
        if q.text in doc.text:
            return RemovalRecord(doc.id, q.id, 1.0, "exact")
    doc_shingles = ShingleSet.from_text(doc.id, doc.text)
    if not doc_shingles.shingles:
        return None
    if index is not None:
        questions = [index.questions[qid] for qid in sorted(index.query(doc_shingles))]
    else:
        questions = list(bench.questions)
    for q in questions:
        score = similarity_13gram(doc_shingles, q.shingles, mode)
        if score > threshold:
            return RemovalRecord(doc.id, q.id, score, "ngram")
    return None


def decontaminate(docs: Iterable[Document], bench: BenchmarkSet,
                  threshold: float = DEFAULT_THRESHOLD, mode: str = "containment",
                  use_index: bool = True,
                  removed: Optional[list] = None) -> Iterator[Document]:
    """Yield documents that do not overlap the benchmark; collect removal
    records (doc_id, question_id, score, reason) into ``removed`` if given."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    index = CandidateIndex.build(bench) if use_index else None
    for doc in docs:
        record = check_document(doc, bench, threshold, mode, index)
        if record is None:
            yield doc
        elif removed is not None:
            removed.append(record)


def write_removal_log(removed: list, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in removed:
            fh.write(json.dumps({"doc_id": r.doc_id, "question_id": r.question_id,
                                 "score": r.score, "reason": r.reason}) + "\n")
