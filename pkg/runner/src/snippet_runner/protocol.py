"""Line protocol loop: one JSON request per stdin line, one JSON reply per
stdout line, flushed immediately.

Request:  {"code": str, "time_limit_s": num, "memory_limit_mb": int,
           "stdout_cap": int}
Reply:    {"status": "ok"|"runtime_error"|"timeout"|"resource_exceeded",
           "stdout": str, "stderr": str, "wall_time_ms": int}
"""

from __future__ import annotations

import json
import sys

from .executor import run_once


def handle_line(line: str) -> dict:
    try:
        request = json.loads(line)
        return run_once(
            code=request["code"],
            time_limit_s=float(request["time_limit_s"]),
            memory_limit_mb=int(request["memory_limit_mb"]),
            stdout_cap=int(request["stdout_cap"]),
        )
    except Exception as exc:  # one well-formed reply per line, no matter what
        return {"status": "runtime_error", "stdout": "",
                "stderr": f"bad request: {exc}", "wall_time_ms": 0}


def serve(stdin=None, stdout=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(json.dumps(handle_line(line), ensure_ascii=False) + "\n")
        stdout.flush()
    return 0


def main() -> int:
    return serve()


if __name__ == "__main__":
    sys.exit(main())
