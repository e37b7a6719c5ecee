"""Chat-completion gateway with content-addressed caching, retries with
exponential backoff, a token-bucket rate limiter, and offline fixture playback.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .corpus import ConfigurationError
from .prompts import TEMPLATES

logger = logging.getLogger(__name__)

DEFAULT_MAX_TOKENS = 2048
DEFAULT_TEXT_BUDGET = 20_000  # chars of source text substituted into {TEXT}


class TransportError(Exception):
    pass


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple  # of (role, content) pairs
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS

    @property
    def request_key(self) -> str:
        payload = json.dumps(
            {
                "model_id": self.model_id,
                "messages": list(self.messages),
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @classmethod
    def user(cls, model_id: str, prompt: str, **kw) -> "ChatRequest":
        return cls(model_id=model_id, messages=(("user", prompt),), **kw)


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "complete"  # complete | length | error
    latency_ms: int = 0
    from_cache: bool = False


def render_prompt(template: str, text: str, max_chars: Optional[int] = DEFAULT_TEXT_BUDGET) -> str:
    """Fill the named template's {TEXT} slot. Long texts are truncated to
    ``max_chars`` characters so prompts stay within model context."""
    if template not in TEMPLATES:
        raise ConfigurationError(f"unknown prompt template {template!r}")
    if not text:
        raise ValueError("text must be non-empty")
    if max_chars is not None and len(text) > max_chars:
        text = text[:max_chars]
    return TEMPLATES[template].replace("{TEXT}", text)


class RateLimiter:
    """Token bucket; ``acquire`` blocks until a slot is free."""

    def __init__(self, rate_per_s: float, burst: int = 1):
        self.rate = rate_per_s
        self.capacity = burst
        self.tokens = float(burst)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            time.sleep(wait)


class FixtureTransport:
    """Plays back recorded responses from a directory of <request_key>.json
    files ({"text": ..., "finish_reason": ...}). Missing fixture -> error."""

    def __init__(self, fixtures_dir: str):
        self.fixtures_dir = fixtures_dir

    def __call__(self, request: ChatRequest) -> ChatResponse:
        path = os.path.join(self.fixtures_dir, request.request_key + ".json")
        if not os.path.exists(path):
            raise TransportError(f"no fixture for request {request.request_key}")
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
        return ChatResponse(text=rec["text"], finish_reason=rec.get("finish_reason", "complete"))

    def record(self, request: ChatRequest, text: str, finish_reason: str = "complete") -> str:
        os.makedirs(self.fixtures_dir, exist_ok=True)
        path = os.path.join(self.fixtures_dir, request.request_key + ".json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"text": text, "finish_reason": finish_reason}, fh, ensure_ascii=False)
        return path


class HttpTransport:
    """OpenAI-style chat completions endpoint. Endpoint and key come from
    arguments or the MATHCORPUS_GATEWAY_URL / MATHCORPUS_GATEWAY_KEY env vars."""

    def __init__(self, endpoint: Optional[str] = None, api_key: Optional[str] = None,
                 timeout_s: float = 120.0):
        self.endpoint = endpoint or os.environ.get("MATHCORPUS_GATEWAY_URL")
        self.api_key = api_key or os.environ.get("MATHCORPUS_GATEWAY_KEY", "")
        self.timeout_s = timeout_s
        if not self.endpoint:
            raise ConfigurationError(
                "gateway endpoint not configured (MATHCORPUS_GATEWAY_URL)")

    def __call__(self, request: ChatRequest) -> ChatResponse:
        import httpx

        payload = {
            "model": request.model_id,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(self.endpoint, json=payload, headers=headers,
                              timeout=self.timeout_s)
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        try:
            body = resp.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            finish = "length" if choice.get("finish_reason") == "length" else "complete"
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed completion payload: {exc}") from exc
        return ChatResponse(text=text, finish_reason=finish)


class Gateway:
    """Caching front door for all LLM calls.

    ``transport`` is any callable ChatRequest -> ChatResponse; network and
    fixture transports are provided. Cache entries are one JSON file per
    request key, so a completed call is never re-issued.
    """

    def __init__(self, transport: Callable[[ChatRequest], ChatResponse],
                 cache_dir: Optional[str] = None, max_attempts: int = 3,
                 backoff_s: float = 1.0, rate_limiter: Optional[RateLimiter] = None):
        self.transport = transport
        self.cache_dir = cache_dir
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.rate_limiter = rate_limiter
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _key_lock(self, key: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(key, threading.Lock())

    def _cache_path(self, key: str) -> Optional[str]:
        if self.cache_dir is None:
            return None
        return os.path.join(self.cache_dir, key[:2], key + ".json")

    def _cache_read(self, key: str) -> Optional[ChatResponse]:
        path = self._cache_path(key)
        if path is None or not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            rec = json.load(fh)
        return ChatResponse(text=rec["text"], finish_reason=rec["finish_reason"],
                            latency_ms=rec.get("latency_ms", 0), from_cache=True)

    def _cache_write(self, key: str, response: ChatResponse) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        os.makedirs(os.path.dirname(path), exist_ok=True)
        tmp = path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"text": response.text, "finish_reason": response.finish_reason,
                       "latency_ms": response.latency_ms}, fh, ensure_ascii=False)
        os.replace(tmp, path)

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = request.request_key
        with self._key_lock(key):
            cached = self._cache_read(key)
            if cached is not None:
                return cached
            last_exc: Optional[Exception] = None
            for attempt in range(self.max_attempts):
                if self.rate_limiter is not None:
                    self.rate_limiter.acquire()
                start = time.monotonic()
                try:
                    response = self.transport(request)
                except TransportError as exc:
                    last_exc = exc
                    logger.warning("gateway attempt %d/%d failed: %s",
                                   attempt + 1, self.max_attempts, exc)
                    if attempt + 1 < self.max_attempts:
                        time.sleep(self.backoff_s * 2 ** attempt)
                    continue
                latency = int((time.monotonic() - start) * 1000)
                response = ChatResponse(text=response.text,
                                        finish_reason=response.finish_reason,
                                        latency_ms=latency, from_cache=False)
                self._cache_write(key, response)
                return response
            raise TransportError(
                f"gateway exhausted {self.max_attempts} attempts: {last_exc}")
