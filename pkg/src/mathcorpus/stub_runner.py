"""Minimal snippet runner speaking the sandbox line protocol on stdio.

This is the in-package fallback used by tests and small runs: it executes
each snippet as a child Python process in a temp directory with a wall-clock
timeout and output caps. The standalone runner package adds memory limits
and stricter isolation; both speak the same protocol.

Protocol: one JSON request per input line
    {"code": ..., "time_limit_s": ..., "memory_limit_mb": ..., "stdout_cap": ...}
one JSON reply per output line
    {"status": ..., "stdout": ..., "stderr": ..., "wall_time_ms": ...}
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import tempfile
import time

TRUNCATION_MARKER = "...[truncated]"


def cap_output(text: str, cap: int) -> str:
    if len(text.encode("utf-8")) <= cap:
        return text
    raw = text.encode("utf-8")[:cap]
    return raw.decode("utf-8", errors="ignore") + TRUNCATION_MARKER


def run_snippet(code: str, time_limit_s: float, memory_limit_mb: int,
                stdout_cap: int) -> dict:
    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="snippet-") as workdir:
        script = os.path.join(workdir, "snippet.py")
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(code)
        env = {k: v for k, v in os.environ.items()
               if k not in ("http_proxy", "https_proxy", "HTTP_PROXY", "HTTPS_PROXY")}
        try:
            proc = subprocess.run(
                [sys.executable, script],
                cwd=workdir,
                capture_output=True,
                text=True,
                timeout=time_limit_s,
                env=env,
            )
        except subprocess.TimeoutExpired as exc:
            return {
                "status": "timeout",
                "stdout": cap_output(_decode(exc.stdout), stdout_cap),
                "stderr": cap_output(_decode(exc.stderr), stdout_cap),
                "wall_time_ms": int((time.monotonic() - start) * 1000),
            }
        wall_ms = int((time.monotonic() - start) * 1000)
        if proc.returncode == 0:
            status = "ok"
        elif "MemoryError" in proc.stderr:
            status = "resource_exceeded"
        else:
            status = "runtime_error"
        return {
            "status": status,
            "stdout": cap_output(proc.stdout, stdout_cap),
            "stderr": cap_output(proc.stderr, stdout_cap),
            "wall_time_ms": wall_ms,
        }


def _decode(data) -> str:
    if data is None:
        return ""
    if isinstance(data, bytes):
        return data.decode("utf-8", errors="replace")
    return data


def main() -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            reply = run_snippet(
                code=req["code"],
                time_limit_s=float(req["time_limit_s"]),
                memory_limit_mb=int(req["memory_limit_mb"]),
                stdout_cap=int(req["stdout_cap"]),
            )
        except Exception as exc:  # protocol discipline: always one reply line
            reply = {"status": "runtime_error", "stdout": "",
                     "stderr": f"runner error: {exc}", "wall_time_ms": 0}
        sys.stdout.write(json.dumps(reply, ensure_ascii=False) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
