"""Per-component corpus statistics and per-stage retention reporting."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .corpus import Document, SOURCES, TokenCounter

COLUMNS = ("Components", "Size (MB)", "Documents", "Tokens", "Average (Tokens)")

MB = 1 << 20


@dataclass(frozen=True)
class ComponentStats:
    component: str
    size_mb: float
    documents: int
    tokens: int

    @property
    def average_tokens(self) -> float:
        return self.tokens / self.documents if self.documents else 0.0


def compute_stats(corpus: Iterable[Document],
                  counter: TokenCounter = TokenCounter()) \
        -> tuple[list[ComponentStats], ComponentStats]:
    """Group by source; a stored token_count wins over re-counting.
    Size is UTF-8 text bytes only, so it is stable across metadata changes."""
    size = {s: 0 for s in SOURCES}
    docs = {s: 0 for s in SOURCES}
    toks = {s: 0 for s in SOURCES}
    for doc in corpus:
        size[doc.source] += len(doc.text.encode("utf-8"))
        docs[doc.source] += 1
        toks[doc.source] += doc.token_count if doc.token_count is not None \
            else counter.count(doc.text)
    rows = [ComponentStats(component=s, size_mb=size[s] / MB,
                           documents=docs[s], tokens=toks[s])
            for s in SOURCES if docs[s]]
    total = ComponentStats(component="Total",
                           size_mb=sum(r.size_mb for r in rows),
                           documents=sum(r.documents for r in rows),
                           tokens=sum(r.tokens for r in rows))
    return rows, total


def _row_values(row: ComponentStats, full_precision: bool = False) -> list:
    size = repr(row.size_mb) if full_precision else f"{row.size_mb:.2f}"
    return [row.component, size, str(row.documents),
            str(row.tokens), str(round(row.average_tokens))]


def render_report(stats: tuple[list[ComponentStats], ComponentStats],
                  format: str = "table") -> str:
    rows, total = stats
    if format == "csv":
        lines = [list(COLUMNS)] + [_row_values(r, True) for r in rows] \
            + [_row_values(total, True)]
        buf = io.StringIO()
        csv.writer(buf).writerows(lines)
        return buf.getvalue()
    lines = [list(COLUMNS)] + [_row_values(r) for r in rows] + [_row_values(total)]
    if format != "table":
        raise ValueError(f"unknown report format {format!r}")
    widths = [max(len(row[i]) for row in lines) for i in range(len(COLUMNS))]
    out = []
    for i, row in enumerate(lines):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0 or i == len(lines) - 2:
            out.append("-" * (sum(widths) + 2 * (len(widths) - 1)))
    return "\n".join(out) + "\n"


def parse_csv_report(text: str) -> tuple[list[ComponentStats], ComponentStats]:
    rows = list(csv.reader(io.StringIO(text)))
    parsed = [ComponentStats(component=r[0], size_mb=float(r[1]),
                             documents=int(r[2]), tokens=int(r[3]))
              for r in rows[1:]]
    return parsed[:-1], parsed[-1]


def retention_report(manifests: Iterable[dict]) -> str:
    """Before/after document and token counts per stage, with the ratio."""
    lines = [f"{'Stage':<20}{'Docs in':>10}{'Docs out':>10}"
             f"{'Tokens in':>14}{'Tokens out':>14}{'Ratio':>8}"]
    for m in manifests:
        if m is None or "stage" not in m:
            lines.append(f"{'(unknown)':<20}{'-':>10}{'-':>10}{'-':>14}{'-':>14}{'-':>8}")
            continue
        docs_in = m.get("docs_in", 0)
        docs_out = m.get("docs_out", 0)
        ratio = f"{docs_out / docs_in:.3f}" if docs_in else "n/a"
        lines.append(f"{m['stage']:<20}{docs_in:>10}{docs_out:>10}"
                     f"{m.get('tokens_in', 0):>14}{m.get('tokens_out', 0):>14}{ratio:>8}")
    return "\n".join(lines) + "\n"


def load_manifest(path: str) -> Optional[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError):
        return None
