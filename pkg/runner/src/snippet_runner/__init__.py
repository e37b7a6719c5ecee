"""Isolated snippet executor: runs one code snippet per request under wall-clock
and address-space limits, speaking a JSON-per-line protocol on stdio."""

from .executor import TRUNCATION_MARKER, run_once
from .protocol import main, serve

__all__ = ["TRUNCATION_MARKER", "run_once", "serve", "main"]
