"""Execute one untrusted code snippet under resource limits.

Each snippet runs as a child interpreter in a fresh temporary directory that
is deleted afterwards, so consecutive runs share no filesystem state. The
child gets an address-space cap via ``resource.setrlimit`` and is killed
(process group and all) once the wall-clock limit expires.
"""

from __future__ import annotations

import os
import resource
import signal
import subprocess
import sys
import tempfile
import time

TRUNCATION_MARKER = "...[truncated]"

# wall-clock grace beyond the requested limit before the kill must land
KILL_GRACE_S = 1.0

_STATUSES = ("ok", "runtime_error", "timeout", "resource_exceeded")


def cap_output(text: str, cap: int) -> str:
    raw = text.encode("utf-8")
    if len(raw) <= cap:
        return text
    return raw[:cap].decode("utf-8", errors="ignore") + TRUNCATION_MARKER


def _limit_resources(memory_limit_bytes: int):
    def apply():
        resource.setrlimit(resource.RLIMIT_AS,
                           (memory_limit_bytes, memory_limit_bytes))
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
    return apply


def _validate(code: str, time_limit_s: float, memory_limit_mb: int,
              stdout_cap: int) -> str | None:
    if not isinstance(code, str) or not code.strip():
        return "code must be a non-empty string"
    if not time_limit_s > 0:
        return "time_limit_s must be positive"
    if not memory_limit_mb > 0:
        return "memory_limit_mb must be positive"
    if not stdout_cap > 0:
        return "stdout_cap must be positive"
    return None


def run_once(code: str, time_limit_s: float, memory_limit_mb: int,
             stdout_cap: int) -> dict:
    """Run one snippet; always returns a complete reply record."""
    problem = _validate(code, time_limit_s, memory_limit_mb, stdout_cap)
    if problem is not None:
        return {"status": "runtime_error", "stdout": "",
                "stderr": f"invalid request: {problem}", "wall_time_ms": 0}

    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="snippet-") as workdir:
        script = os.path.join(workdir, "snippet.py")
        with open(script, "w", encoding="utf-8") as fh:
            fh.write(code)
        env = {k: v for k, v in os.environ.items()
               if k.lower() not in ("http_proxy", "https_proxy", "all_proxy")}
        env["TMPDIR"] = workdir
        proc = subprocess.Popen(
            [sys.executable, "-I", script],
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            stdin=subprocess.DEVNULL,
            text=True,
            env=env,
            start_new_session=True,
            preexec_fn=_limit_resources(memory_limit_mb * 1024 * 1024),
        )
        timed_out = False
        try:
            stdout, stderr = proc.communicate(timeout=time_limit_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            stdout, stderr = proc.communicate()
        wall_time_ms = int((time.monotonic() - start) * 1000)

    if timed_out:
        status = "timeout"
    elif proc.returncode == 0:
        status = "ok"
    elif "MemoryError" in (stderr or ""):
        status = "resource_exceeded"
    else:
        status = "runtime_error"
    return {
        "status": status,
        "stdout": cap_output(stdout or "", stdout_cap),
        "stderr": cap_output(stderr or "", stdout_cap),
        "wall_time_ms": wall_time_ms,
    }
