"""Supervised linear text classifier over averaged word + hashed n-gram
embeddings, with a 2-class softmax output and linearly decaying SGD.

Deterministic given the seed and input order; single-threaded training.
"""

from __future__ import annotations

import io
import json
import logging
import struct
from dataclasses import dataclass, asdict
from typing import Iterable, Iterator, Optional

import numpy as np

from .corpus import ConfigurationError, Document
from .tokenizers import fnv1a_64, word_tokens

logger = logging.getLogger(__name__)

MAGIC = b"MCFT"
FORMAT_VERSION = 1

LABEL_POSITIVE = 0
LABEL_NEGATIVE = 1


class TrainingError(Exception):
    pass


class ModelFormatError(Exception):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    dim: int = 50
    lr: float = 0.5
    word_ngrams: int = 2
    epochs: int = 5
    buckets: int = 2_000_000
    min_count: int = 1
    seed: int = 1

    def __post_init__(self):
        if self.dim < 1 or self.lr <= 0 or self.word_ngrams < 1 \
                or self.epochs < 1 or self.buckets < 1:
            raise ConfigurationError(f"invalid classifier config: {self}")


class ClassifierModel:
    def __init__(self, config: ClassifierConfig, vocab: dict,
                 input_matrix: np.ndarray, output_matrix: np.ndarray):
        self.config = config
        self.vocab = vocab
        self.input_matrix = input_matrix    # (|vocab| + buckets, dim) float32
        self.output_matrix = output_matrix  # (2, dim) float32

    def _feature_indices(self, text: str) -> list[int]:
        tokens = word_tokens(text)
        idx = [self.vocab[t] for t in tokens if t in self.vocab]
        base = len(self.vocab)
        for n in range(2, self.config.word_ngrams + 1):
            for i in range(len(tokens) - n + 1):
                gram = " ".join(tokens[i : i + n])
                idx.append(base + fnv1a_64(gram.encode("utf-8")) % self.config.buckets)
        return idx

    def predict_proba(self, text: str) -> np.ndarray:
        """Class probabilities [p_positive, p_negative]; uniform when the
        text yields no known features."""
        idx = self._feature_indices(text)
        if not idx:
            return np.array([0.5, 0.5])
        hidden = self.input_matrix[idx].mean(axis=0)
        logits = self.output_matrix @ hidden
        return _softmax(logits.astype(np.float64))

    def score(self, text: str) -> float:
        return float(self.predict_proba(text)[LABEL_POSITIVE])


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _build_vocab(texts: list[str], min_count: int) -> dict:
    counts: dict[str, int] = {}
    for text in texts:
        for tok in word_tokens(text):
            counts[tok] = counts.get(tok, 0) + 1
    # insertion order of first occurrence keeps the mapping deterministic
    return {tok: i for i, tok in enumerate(t for t in counts if counts[t] >= min_count)}


def train(positive: Iterable[Document], negative: Iterable[Document],
          config: ClassifierConfig = ClassifierConfig()) -> ClassifierModel:
    pos_texts = [d.text for d in positive]
    neg_texts = [d.text for d in negative]
    if not pos_texts or not neg_texts:
        raise ConfigurationError("both positive and negative streams must be non-empty")

    vocab = _build_vocab(pos_texts + neg_texts, config.min_count)
    rng = np.random.default_rng(config.seed)
    n_rows = len(vocab) + config.buckets
    input_matrix = rng.uniform(-1.0 / config.dim, 1.0 / config.dim,
                               size=(n_rows, config.dim)).astype(np.float32)
    output_matrix = np.zeros((2, config.dim), dtype=np.float32)

    examples = [(t, LABEL_POSITIVE) for t in pos_texts] + \
               [(t, LABEL_NEGATIVE) for t in neg_texts]
    order = rng.permutation(len(examples))

    model = ClassifierModel(config, vocab, input_matrix, output_matrix)
    feature_cache = [model._feature_indices(t) for t, _ in examples]

    total_updates = config.epochs * len(examples)
    t = 0
    for _epoch in range(config.epochs):
        for j in order:
            idx = feature_cache[j]
            label = examples[j][1]
            lr_t = config.lr * (1.0 - t / total_updates)
            t += 1
            if not idx:
                continue
            hidden = input_matrix[idx].mean(axis=0)
            probs = _softmax((output_matrix @ hidden).astype(np.float64))
            if not np.all(np.isfinite(probs)):
                raise TrainingError(f"non-finite probabilities at update {t}")
            grad = -probs.astype(np.float32)
            grad[label] += 1.0
            hidden_grad = (output_matrix.T @ grad) * np.float32(lr_t / len(idx))
            output_matrix += np.float32(lr_t) * np.outer(grad, hidden)
            np.add.at(input_matrix, idx, hidden_grad)

    return model


def score(model: ClassifierModel, text: str) -> float:
    return model.score(text)


def filter_by_score(docs: Iterable[Document], model: ClassifierModel,
                    threshold: float, report: Optional[dict] = None) -> Iterator[Document]:
    """Yield documents scoring >= threshold, in input order.

    Pass ``report`` to collect in/out counts (filled as the stream drains).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"threshold must be in [0, 1], got {threshold}")
    n_in = n_out = 0
    for doc in docs:
        n_in += 1
        if model.score(doc.text) >= threshold:
            n_out += 1
            yield doc
        if report is not None:
            report["in"] = n_in
            report["out"] = n_out


def save_model(model: ClassifierModel, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        header = json.dumps({
            "config": asdict(model.config),
            "vocab": list(model.vocab.keys()),
            "rows": model.input_matrix.shape[0],
            "dim": model.input_matrix.shape[1],
        }).encode("utf-8")
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(model.input_matrix.astype("<f4").tobytes())
        fh.write(model.output_matrix.astype("<f4").tobytes())


def load_model(path: str) -> ClassifierModel:
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(4) != MAGIC:
        raise ModelFormatError(f"{path}: not a classifier model file")
    (version,) = struct.unpack("<I", buf.read(4))
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    try:
        (hlen,) = struct.unpack("<I", buf.read(4))
        header = json.loads(buf.read(hlen))
        config = ClassifierConfig(**header["config"])
        vocab = {tok: i for i, tok in enumerate(header["vocab"])}
        rows, dim = header["rows"], header["dim"]
        input_matrix = np.frombuffer(buf.read(rows * dim * 4), dtype="<f4",
                                     count=rows * dim).reshape(rows, dim).copy()
        output_matrix = np.frombuffer(buf.read(2 * dim * 4), dtype="<f4",
                                      count=2 * dim).reshape(2, dim).copy()
    except (struct.error, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"{path}: truncated or corrupt model file: {exc}") from exc
    return ClassifierModel(config, vocab, input_matrix, output_matrix)


def model_bytes(model: ClassifierModel) -> bytes:
    """Serialized form, for determinism checks and manifest hashing."""
    import tempfile, os
    fd, tmp = tempfile.mkstemp()
    os.close(fd)
    try:
        save_model(model, tmp)
        with open(tmp, "rb") as fh:
            return fh.read()
    finally:
        os.remove(tmp)
