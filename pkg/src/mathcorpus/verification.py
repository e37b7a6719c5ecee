"""Snippet execution, expected-result matching, and document composition.

Snippets run out-of-process via the sandbox line protocol (JSON request and
reply per line over the runner's stdio). The in-package stub runner is the
default; any protocol-compatible runner command can be substituted.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
import sys
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .corpus import Document
from .extraction import ExtractedComputation, render_computation

logger = logging.getLogger(__name__)

STATUSES = ("ok", "runtime_error", "timeout", "resource_exceeded", "sandbox_failure")
MATCH_KINDS = ("numeric", "symbolic", "substring", "none", "unverifiable")
POSITIVE_KINDS = ("numeric", "symbolic", "substring")

REL_TOL = 1e-6
ABS_TOL = 1e-9


@dataclass(frozen=True)
class ExecutionLimits:
    time_s: float = 10.0
    memory_mb: int = 512
    stdout_cap: int = 65536


@dataclass(frozen=True)
class ExecutionResult:
    status: str
    stdout: str = ""
    stderr: str = ""
    wall_time_ms: int = 0


@dataclass(frozen=True)
class MatchOutcome:
    kind: str
    detail: str = ""


@dataclass(frozen=True)
class ComposedDocument:
    mode: str  # step_and_code | step_only | code_only
    text: str
    computation: ExtractedComputation


class RunnerClient:
    """Owns one runner subprocess; one request in flight at a time."""

    def __init__(self, command: Optional[list[str]] = None):
        self.command = command or [sys.executable, "-m", "mathcorpus.stub_runner"]
        self._proc: Optional[subprocess.Popen] = None

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
            )
        return self._proc

    def execute(self, code: str, limits: ExecutionLimits) -> ExecutionResult:
        request = {
            "code": code,
            "time_limit_s": limits.time_s,
            "memory_limit_mb": limits.memory_mb,
            "stdout_cap": limits.stdout_cap,
        }
        try:
            proc = self._ensure_process()
            proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
            if not line:
                raise OSError("runner closed its output stream")
            reply = json.loads(line)
            status = reply["status"]
            if status not in STATUSES or status == "sandbox_failure":
                raise ValueError(f"invalid runner status {status!r}")
            return ExecutionResult(
                status=status,
                stdout=reply.get("stdout", ""),
                stderr=reply.get("stderr", ""),
                wall_time_ms=int(reply.get("wall_time_ms", 0)),
            )
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            logger.warning("runner protocol failure: %s", exc)
            self.close()
            return ExecutionResult(status="sandbox_failure", stderr=str(exc))

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def execute_snippet(code: str, limits: ExecutionLimits = ExecutionLimits(),
                    client: Optional[RunnerClient] = None) -> ExecutionResult:
    if client is not None:
        return client.execute(code, limits)
    with RunnerClient() as owned:
        return owned.execute(code, limits)


# ---------------------------------------------------------------------------
# Expected-value extraction and output matching

_LATEX_SCI_RE = re.compile(
    r"(-?\d+(?:\.\d+)?)\s*(?:\*|\\times|\\cdot|×)\s*10\s*\^\s*\{?\s*(-?\d+)\s*\}?")
_FRAC_RE = re.compile(r"\\[td]?frac\s*\{\s*(-?\d+(?:\.\d+)?)\s*\}\s*\{\s*(-?\d+(?:\.\d+)?)\s*\}")
_SLASH_FRAC_RE = re.compile(r"(?<![\w.])(-?\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?)(?![\w.])")
_NUMBER_RE = re.compile(r"(?<![\w.])[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![\w.])")


def normalize_symbolic(text: str) -> str:
    """Whitespace removed, LaTeX powers mapped to **, explicit multiplication
    dropped so '2*x - 2' and '2x - 2' compare equal."""
    s = text.strip().strip("$").strip()
    s = re.sub(r"\s+", "", s)
    s = s.replace("^", "**")
    s = re.sub(r"(?<!\*)\*(?!\*)", "", s)
    return s


def _numeric_candidates(text: str) -> list[float]:
    values: list[float] = []

    def _mask(m: re.Match) -> str:
        return " " * len(m.group(0))

    def _take(regex, make):
        nonlocal text
        for m in regex.finditer(text):
            try:
                values.append(make(m))
            except (ValueError, ZeroDivisionError):
                pass
        text = regex.sub(_mask, text)

    _take(_LATEX_SCI_RE, lambda m: float(m.group(1)) * 10.0 ** int(m.group(2)))
    _take(_FRAC_RE, lambda m: float(m.group(1)) / float(m.group(2)))
    _take(_SLASH_FRAC_RE, lambda m: float(m.group(1)) / float(m.group(2)))
    _take(_NUMBER_RE, lambda m: float(m.group(0)))
    return values


def extract_expected_values(expected_result: str) -> list:
    """Candidate values for output matching: floats for numeric candidates,
    normalized strings for symbolic ones. Empty when nothing parseable."""
    text = expected_result.strip().strip("$").strip()
    if not text:
        return []
    if "=" in text:
        rhs = text.rsplit("=", 1)[1].strip()
        # letters in the RHS (outside LaTeX scientific notation) mean an
        # algebraic expression: match symbolically, not by embedded digits
        masked = _LATEX_SCI_RE.sub("", rhs)
        if re.search(r"[a-zA-Z]", re.sub(r"\\[a-zA-Z]+", "", masked)):
            return [normalize_symbolic(rhs)]
        text = rhs
    return _numeric_candidates(text)


def _stdout_numbers(stdout: str) -> list[float]:
    values = []
    for m in _NUMBER_RE.finditer(stdout):
        try:
            values.append(float(m.group(0)))
        except ValueError:
            pass
    return values


def match_output(stdout: str, candidates: list,
                 rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> MatchOutcome:
    if not candidates:
        return MatchOutcome(kind="unverifiable")
    numeric = [c for c in candidates if isinstance(c, float)]
    symbolic = [c for c in candidates if isinstance(c, str)]

    out_numbers = _stdout_numbers(stdout)
    for cand in numeric:
        for got in out_numbers:
            if abs(got - cand) <= abs_tol or (
                    max(abs(got), abs(cand)) > 0
                    and abs(got - cand) / max(abs(got), abs(cand)) <= rel_tol):
                rel = abs(got - cand) / max(abs(cand), 1e-300)
                return MatchOutcome(kind="numeric", detail=f"rel_err={rel:.3g}")

    norm_lines = [normalize_symbolic(l) for l in stdout.splitlines() if l.strip()]
    for cand in symbolic:
        if cand in norm_lines:
            return MatchOutcome(kind="symbolic", detail=cand)

    norm_all = normalize_symbolic(stdout)
    for cand in symbolic:
        if cand and cand in norm_all:
            return MatchOutcome(kind="substring", detail=cand)

    return MatchOutcome(kind="none")


# ---------------------------------------------------------------------------
# Retention and composition

@dataclass
class VerificationReport:
    total: int = 0
    retained: int = 0
    dropped: dict = field(default_factory=dict)  # reason -> count

    @property
    def retention_ratio(self) -> Optional[float]:
        return self.retained / self.total if self.total else None

    def drop(self, reason: str) -> None:
        self.dropped[reason] = self.dropped.get(reason, 0) + 1


def verify_computation(comp: ExtractedComputation, limits: ExecutionLimits,
                       client: RunnerClient, max_sandbox_retries: int = 2) \
        -> tuple[ExecutionResult, MatchOutcome]:
    result = client.execute(comp.code, limits)
    retries = 0
    while result.status == "sandbox_failure" and retries < max_sandbox_retries:
        retries += 1
        result = client.execute(comp.code, limits)
    if result.status == "timeout":
        # confirm: a second run distinguishes flaky load from a real loop
        confirm = client.execute(comp.code, limits)
        if confirm.status != "sandbox_failure":
            result = confirm if confirm.status != "timeout" else result
    if result.status != "ok":
        return result, MatchOutcome(kind="none", detail=result.status)
    outcome = match_output(result.stdout, extract_expected_values(comp.expected_result))
    return result, outcome


def verify_and_retain(computations: Iterable[ExtractedComputation],
                      limits: ExecutionLimits = ExecutionLimits(),
                      policy: str = "drop",
                      runner_command: Optional[list[str]] = None) \
        -> tuple[list[tuple[ExtractedComputation, ExecutionResult, MatchOutcome]],
                 VerificationReport]:
    """Execute every computation and keep those whose output matches.

    ``policy`` controls unverifiable results (no parseable expected value):
    "drop" (default) or "retain_flagged".
    """
    if policy not in ("drop", "retain_flagged"):
        raise ValueError(f"unknown retention policy {policy!r}")
    report = VerificationReport()
    retained = []
    with RunnerClient(runner_command) as client:
        for comp in computations:
            report.total += 1
            result, outcome = verify_computation(comp, limits, client)
            if result.status == "sandbox_failure":
                report.drop("sandbox_failure")
                continue
            if result.status != "ok":
                report.drop(result.status)
                continue
            if outcome.kind in POSITIVE_KINDS or (
                    outcome.kind == "unverifiable" and policy == "retain_flagged"):
                report.retained += 1
                retained.append((comp, result, outcome))
            else:
                report.drop(f"match_{outcome.kind}")
    return retained, report


def compose_training_document(comp: ExtractedComputation, mode: str) -> ComposedDocument:
    if mode == "step_and_code":
        text = render_computation(comp, include_code=True)
    elif mode == "step_only":
        text = render_computation(comp, include_code=False)
    elif mode == "code_only":
        text = f"```python\n{comp.code}\n```\n"
    else:
        raise ValueError(f"unknown composition mode {mode!r}")
    return ComposedDocument(mode=mode, text=text, computation=comp)


def composed_to_document(composed: ComposedDocument) -> Document:
    return Document.create(
        source="translated_code",
        text=composed.text,
        meta={
            "mode": composed.mode,
            "origin_doc": composed.computation.source_doc_id,
            "block_index": str(composed.computation.block_index),
        },
    )
