"""Parsing of the block-structured extraction replies into computations.

A reply is a sequence of blocks, each carrying four sections in order:
conditions, expression, expected result, and a fenced Python snippet.
Parsing is total: bad regions become reject reasons, never exceptions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from typing import Iterable, Optional

from .corpus import Document
from .gateway import ChatRequest, Gateway, TransportError, render_prompt

HEADERS = ("conditions needed", "computation expression",
           "computation result", "python code snippet")

_HEADER_RE = re.compile(
    r"^\s*[#*_]*\s*(conditions needed|computation expression|"
    r"computation result|python code snippet)\s*:?\s*[*_]*\s*$",
    re.IGNORECASE,
)
_NUMBERED_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")
_FENCE_OPEN_RE = re.compile(r"^\s*```[\w+-]*\s*$")
_FENCE_CLOSE_RE = re.compile(r"^\s*```\s*$")
_DOLLAR_SPAN_RE = re.compile(r"\$\$(.+?)\$\$|\$(.+?)\$", re.DOTALL)


@dataclass(frozen=True)
class ExtractedComputation:
    source_doc_id: str
    conditions: tuple
    expression: str
    expected_result: str
    code: str
    block_index: int = 0


@dataclass
class ExtractionReport:
    doc_id: str
    blocks_found: int = 0
    blocks_valid: int = 0
    reject_reasons: list = field(default_factory=list)


def _header_of(line: str) -> Optional[str]:
    m = _HEADER_RE.match(line)
    return m.group(1).lower() if m else None


def _split_blocks(lines: list[str]) -> list[list[tuple[str, list[str]]]]:
    """Group lines into blocks of (header, section lines); a new block starts
    at each 'Conditions Needed' header. Text before the first header is ignored."""
    blocks: list[list[tuple[str, list[str]]]] = []
    current_section: Optional[list[str]] = None
    for line in lines:
        header = _header_of(line)
        if header is not None:
            if header == HEADERS[0] or not blocks:
                blocks.append([])
            blocks[-1].append((header, []))
            current_section = blocks[-1][-1][1]
        elif current_section is not None:
            current_section.append(line)
    return blocks


def _parse_conditions(section: list[str]) -> list[str]:
    conditions: list[str] = []
    for line in section:
        m = _NUMBERED_RE.match(line)
        if m:
            conditions.append(m.group(1))
        elif line.strip() and conditions:
            # wrapped continuation of the previous numbered line
            conditions[-1] += " " + line.strip()
    return conditions


def _parse_expression(section: list[str]) -> str:
    text = "\n".join(section).strip()
    spans = _DOLLAR_SPAN_RE.findall(text)
    if spans:
        # innermost span: last non-empty capture of the first match
        a, b = spans[0]
        return (a or b).strip()
    return text


def _parse_code(section: list[str]) -> tuple[Optional[str], Optional[str]]:
    """Returns (code, reject_reason)."""
    it = iter(range(len(section)))
    open_at = None
    for i in it:
        if _FENCE_OPEN_RE.match(section[i]):
            open_at = i
            break
        if section[i].strip():
            break
    if open_at is None:
        return None, "missing code fence"
    for j in range(open_at + 1, len(section)):
        if _FENCE_CLOSE_RE.match(section[j]):
            code = "\n".join(section[open_at + 1 : j]).strip("\n")
            if not code.strip():
                return None, "empty code block"
            return code, None
    return None, "unterminated fence"


def parse_extraction_output(reply: str, source_doc_id: str = "") \
        -> tuple[list[ExtractedComputation], list[str]]:
    """Parse a model reply into computations plus reject reasons.

    A block missing any of the four sections, or with sections out of order,
    is rejected whole; never raises on arbitrary input.
    """
    computations: list[ExtractedComputation] = []
    reasons: list[str] = []
    blocks = _split_blocks(reply.splitlines())
    for block_index, sections in enumerate(blocks):
        order = [h for h, _ in sections]
        if order != list(HEADERS):
            reasons.append(f"block {block_index}: sections {order!r} != expected order")
            continue
        by_header = dict(sections)
        conditions = _parse_conditions(by_header[HEADERS[0]])
        expression = _parse_expression(by_header[HEADERS[1]])
        expected = "\n".join(by_header[HEADERS[2]]).strip()
        m = _DOLLAR_SPAN_RE.fullmatch(expected)
        if m:
            expected = (m.group(1) or m.group(2)).strip()
        code, code_reason = _parse_code(by_header[HEADERS[3]])
        if not expression:
            reasons.append(f"block {block_index}: empty expression")
            continue
        if code_reason is not None:
            reasons.append(f"block {block_index}: {code_reason}")
            continue
        computations.append(ExtractedComputation(
            source_doc_id=source_doc_id,
            conditions=tuple(conditions),
            expression=expression,
            expected_result=expected,
            code=code,
            block_index=block_index,
        ))
    if not blocks:
        reasons.append("no blocks")
    return computations, reasons


def render_computation(comp: ExtractedComputation, include_code: bool = True) -> str:
    """Render a computation back into the four-section block layout.

    Inverse of parse_extraction_output for valid computations; composition
    relies on that round trip.
    """
    lines = ["Conditions Needed:"]
    lines += [f"{i + 1}. {c}" for i, c in enumerate(comp.conditions)]
    lines += ["", "Computation Expression:", f"${comp.expression}$", "",
              "Computation Result:", comp.expected_result]
    if include_code:
        lines += ["", "Python Code Snippet:", "```python", comp.code, "```"]
    return "\n".join(lines) + "\n"


def extract_computations(doc: Document, gateway: Gateway, model_id: str,
                         max_chars: Optional[int] = None) \
        -> tuple[list[ExtractedComputation], ExtractionReport]:
    """Prompt the model on one document and parse its reply."""
    report = ExtractionReport(doc_id=doc.id)
    kwargs = {} if max_chars is None else {"max_chars": max_chars}
    prompt = render_prompt("extraction", doc.text, **kwargs)
    request = ChatRequest.user(model_id, prompt)
    try:
        response = gateway.complete(request)
    except TransportError as exc:
        report.reject_reasons.append(f"gateway failure: {exc}")
        return [], report
    computations, reasons = parse_extraction_output(response.text, doc.id)
    if response.finish_reason == "length" and computations:
        # the final block may be cut off mid-code; drop it
        computations = computations[:-1]
        reasons.append("dropped final block: truncated reply")
    report.blocks_found = len(_split_blocks(response.text.splitlines()))
    report.blocks_valid = len(computations)
    report.reject_reasons.extend(reasons)
    return computations, report


def rewrite_document(doc: Document, gateway: Gateway, model_id: str,
                     max_chars: Optional[int] = None) -> Optional[Document]:
    """Quality-rewrite ablation: ask the model to clean up the text."""
    kwargs = {} if max_chars is None else {"max_chars": max_chars}
    prompt = render_prompt("rewrite", doc.text, **kwargs)
    try:
        response = gateway.complete(ChatRequest.user(model_id, prompt))
    except TransportError:
        return None
    text = response.text.strip()
    if not text:
        return None
    return Document.create(source=doc.source, text=text,
                           meta={**doc.meta, "rewritten_from": doc.id})


def computation_to_record(comp: ExtractedComputation) -> dict:
    rec = asdict(comp)
    rec["conditions"] = list(comp.conditions)
    return rec


def computation_from_record(rec: dict) -> ExtractedComputation:
    return ExtractedComputation(
        source_doc_id=rec["source_doc_id"],
        conditions=tuple(rec["conditions"]),
        expression=rec["expression"],
        expected_result=rec["expected_result"],
        code=rec["code"],
        block_index=rec.get("block_index", 0),
    )


def write_computations(comps: Iterable[ExtractedComputation], path: str) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for comp in comps:
            fh.write(json.dumps(computation_to_record(comp), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_computations(path: str):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield computation_from_record(json.loads(line))
