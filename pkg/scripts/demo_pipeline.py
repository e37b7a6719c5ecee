#!/usr/bin/env python3
"""End-to-end offline demo of the curation pipeline.

Builds a tiny mixed corpus, seeds a fixture directory with canned LLM
replies, then drives the ``mathcorpus run`` driver through extraction,
verification, composition, dedup, and stats — no network required.

Usage: python3 scripts/demo_pipeline.py [workdir]
"""

import os
import subprocess
import sys
import tempfile

import yaml

from mathcorpus.corpus import Document, write_corpus
from mathcorpus.gateway import ChatRequest, FixtureTransport, render_prompt


def reply_for(a, b):
    """A well-formed extraction reply computing a * b."""
    return (
        "Conditions Needed:\n"
        f"1. The first factor is {a}.\n"
        f"2. The second factor is {b}.\n"
        "Computation Expression:\n"
        f"${a} \\times {b}$\n"
        "Computation Result:\n"
        f"{a * b}\n"
        "Python Code Snippet:\n"
        "```python\n"
        f"print({a} * {b})\n"
        "```\n"
    )


def main():
    workdir = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="demo-")
    os.makedirs(workdir, exist_ok=True)
    fixtures = os.path.join(workdir, "fixtures")
    os.makedirs(fixtures, exist_ok=True)
    transport = FixtureTransport(fixtures)

    docs = []
    for i in range(10):
        a, b = i + 2, i + 5
        text = (f"Worked example {i}: multiplying {a} by {b} "
                f"gives {a * b}, as the area of a {a}-by-{b} grid.")
        doc = Document.create(source="web", text=text)
        docs.append(doc)
        prompt = render_prompt("extraction", doc.text)
        transport.record(ChatRequest.user("default", prompt), reply_for(a, b))
    # one duplicate so dedup has something to do
    docs.append(docs[0])

    input_path = os.path.join(workdir, "input.jsonl")
    write_corpus(docs, input_path)

    config_path = os.path.join(workdir, "config.yaml")
    with open(config_path, "w") as fh:
        yaml.safe_dump({
            "input": input_path,
            "outdir": os.path.join(workdir, "out"),
            "gateway": {"mode": "fixtures", "fixtures_dir": fixtures},
            "stages": [
                {"name": "extract"},
                {"name": "verify", "time_limit_s": 10.0},
                {"name": "compose", "mode": "step_and_code"},
                {"name": "dedup"},
                {"name": "stats"},
            ],
        }, fh)

    print(f"workdir: {workdir}")
    subprocess.run([sys.executable, "-m", "mathcorpus.cli", "run",
                    "--config", config_path], check=True)
    print(f"\noutputs in {os.path.join(workdir, 'out')}")


if __name__ == "__main__":
    main()
