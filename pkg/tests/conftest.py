import os

import pytest

from mathcorpus.corpus import Document
from mathcorpus.gateway import ChatRequest, FixtureTransport, Gateway, render_prompt

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def load_fixture(name: str) -> str:
    with open(os.path.join(FIXTURES, name), encoding="utf-8") as fh:
        return fh.read()


def make_doc(text: str, source: str = "web", **meta) -> Document:
    return Document.create(source=source, text=text, meta=meta)


def record_reply(fixtures_dir: str, template: str, doc_text: str, reply: str,
                 model_id: str = "default", finish_reason: str = "complete") -> None:
    """Seed a fixture directory with a canned reply for one document."""
    transport = FixtureTransport(str(fixtures_dir))
    prompt = render_prompt(template, doc_text)
    transport.record(ChatRequest.user(model_id, prompt), reply, finish_reason)


@pytest.fixture
def fixture_gateway(tmp_path):
    """(gateway, record) pair backed by a temp fixture directory."""
    fdir = tmp_path / "llm-fixtures"
    fdir.mkdir()

    def record(template, doc_text, reply, finish_reason="complete"):
        record_reply(str(fdir), template, doc_text, reply,
                     finish_reason=finish_reason)

    return Gateway(FixtureTransport(str(fdir))), record
