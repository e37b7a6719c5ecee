"""Source-specific selection rules: LLM annotation for the second web
filtering round, math-package import filtering for code, and title keyword
selection for textbooks."""

from __future__ import annotations

import logging
import random
import re
import tempfile
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from . import classifier as clf
from .corpus import ConfigurationError, Document, read_corpus, write_corpus
from .gateway import ChatRequest, Gateway, TransportError, render_prompt

logger = logging.getLogger(__name__)

MATH_PACKAGES = frozenset({"sympy", "fractions", "cmath", "scipy", "statistics"})

TEXTBOOK_KEYWORDS = frozenset({
    "algebra", "geometry", "probability", "calculus", "trigonometry",
    "statistics", "arithmetic", "number theory", "linear algebra",
    "topology", "combinatorics",
})

ANNOTATION_MARKER = "The type is:"
DEFAULT_POSITIVE_TYPES = frozenset({1, 2, 3})


@dataclass(frozen=True)
class AnnotationLabel:
    doc_id: str
    type_code: Optional[int]  # None when unparseable or failed
    raw_response: str
    failed: bool = False

    @property
    def parseable(self) -> bool:
        return self.type_code is not None and not self.failed


def parse_annotation(reply: str) -> Optional[int]:
    """Type code from the reply; text after the marker wins if present."""
    tail = reply.split(ANNOTATION_MARKER, 1)[1] if ANNOTATION_MARKER in reply else reply
    m = re.search(r"\d+", tail)
    if m is None:
        return None
    code = int(m.group(0))
    return code if 1 <= code <= 7 else None


def annotate_documents(docs: Iterable[Document], gateway: Gateway, model_id: str,
                       max_chars: Optional[int] = None) -> Iterator[AnnotationLabel]:
    for doc in docs:
        kwargs = {} if max_chars is None else {"max_chars": max_chars}
        prompt = render_prompt("annotation", doc.text, **kwargs)
        try:
            response = gateway.complete(ChatRequest.user(model_id, prompt))
        except TransportError as exc:
            logger.warning("annotation failed for %s: %s", doc.id, exc)
            yield AnnotationLabel(doc_id=doc.id, type_code=None,
                                  raw_response=str(exc), failed=True)
            continue
        yield AnnotationLabel(doc_id=doc.id, type_code=parse_annotation(response.text),
                              raw_response=response.text)


def build_stage2_training_set(docs: Iterable[Document],
                              labels: Iterable[AnnotationLabel],
                              positive_types: frozenset = DEFAULT_POSITIVE_TYPES) \
        -> tuple[list[Document], list[Document]]:
    if not positive_types <= set(range(1, 8)) or 7 in positive_types:
        raise ConfigurationError(f"invalid positive types {positive_types}")
    by_id = {l.doc_id: l for l in labels}
    positives, negatives = [], []
    for doc in docs:
        label = by_id.get(doc.id)
        if label is None or not label.parseable:
            continue
        (positives if label.type_code in positive_types else negatives).append(doc)
    if not positives or not negatives:
        raise ConfigurationError(
            f"annotation produced {len(positives)} positives / {len(negatives)} "
            "negatives; both must be non-empty to train the second-stage classifier")
    return positives, negatives


_IMPORT_RE = re.compile(r"^\s*import\s+(.+)$")
_FROM_RE = re.compile(r"^\s*from\s+([\w.]+)\s+import\s+")


def filter_code_by_imports(doc: Document,
                           packages: frozenset = MATH_PACKAGES) -> bool:
    """True iff a non-comment line imports one of the math packages.

    numpy is deliberately absent from the default set: it is too common in
    non-mathematical code to be a useful signal.
    """
    for raw in doc.text.splitlines():
        line = raw.split("#", 1)[0]
        m = _FROM_RE.match(line)
        if m:
            if m.group(1).split(".", 1)[0] in packages:
                return True
            continue
        m = _IMPORT_RE.match(line)
        if m:
            for part in m.group(1).split(","):
                root = part.strip().split(" as ")[0].strip().split(".", 1)[0]
                if root in packages:
                    return True
    return False


def filter_textbook_by_title(title: str,
                             keywords: frozenset = TEXTBOOK_KEYWORDS) -> bool:
    if not keywords:
        raise ConfigurationError("keyword set must be non-empty")
    lowered = title.lower()
    for kw in keywords:
        pattern = r"\b" + r"\s+".join(re.escape(w) for w in kw.lower().split()) + r"\b"
        if re.search(pattern, lowered):
            return True
    return False


@dataclass
class WebFilterPlan:
    stage1_model: clf.ClassifierModel
    stage1_threshold: float
    stage2_threshold: float
    positive_types: frozenset = DEFAULT_POSITIVE_TYPES
    stage2_model: Optional[clf.ClassifierModel] = None
    stage2_config: clf.ClassifierConfig = field(default_factory=clf.ClassifierConfig)
    annotation_sample_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if 7 in self.positive_types:
            raise ConfigurationError("type 7 (no matching type) cannot be positive")


@dataclass
class WebPipelineReport:
    stage1_in: int = 0
    stage1_out: int = 0
    annotated: int = 0
    stage2_out: int = 0
    stage2_model: Optional[clf.ClassifierModel] = None


def run_web_pipeline(raw: Iterable[Document], plan: WebFilterPlan,
                     gateway: Optional[Gateway] = None, model_id: str = "",
                     report: Optional[WebPipelineReport] = None) -> Iterator[Document]:
    """Coarse filter, annotate a sample, train the finer classifier, filter again.

    Stage-1 survivors are spilled to a temp file so the stream is traversed
    once per stage regardless of corpus size.
    """
    if report is None:
        report = WebPipelineReport()
    with tempfile.NamedTemporaryFile(suffix=".jsonl", delete=True) as spill:
        counts: dict = {}
        n = write_corpus(
            clf.filter_by_score(raw, plan.stage1_model, plan.stage1_threshold, counts),
            spill.name)
        report.stage1_in = counts.get("in", 0)
        report.stage1_out = n
        if n == 0:
            return

        stage2 = plan.stage2_model
        if stage2 is None:
            if gateway is None:
                raise ConfigurationError(
                    "no stage2 model and no gateway to annotate with")
            rng = random.Random(plan.seed)
            survivors = list(read_corpus(spill.name))
            sample = survivors if len(survivors) <= plan.annotation_sample_size \
                else rng.sample(survivors, plan.annotation_sample_size)
            labels = list(annotate_documents(sample, gateway, model_id))
            report.annotated = len(labels)
            positives, negatives = build_stage2_training_set(
                sample, labels, plan.positive_types)
            stage2 = clf.train(positives, negatives, plan.stage2_config)
        report.stage2_model = stage2

        for doc in clf.filter_by_score(read_corpus(spill.name), stage2,
                                       plan.stage2_threshold):
            report.stage2_out += 1
            yield doc
