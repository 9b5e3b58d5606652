"""Model providers: a chat-completions HTTP adapter, a mock, and a response cache."""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

import httpx

from ..gazetteer.sources import RateLimiter

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024


class ProviderError(RuntimeError):
    pass


class NoFixtureError(ProviderError):
    pass


@dataclass(frozen=True)
class LmmRequest:
    prompt: str
    model_id: str
    image: bytes | None = None
    temperature: float = DEFAULT_TEMPERATURE
    max_output_tokens: int = DEFAULT_MAX_TOKENS
    item_id: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def image_sha256(self) -> str | None:
        return hashlib.sha256(self.image).hexdigest() if self.image is not None else None

    @property
    def fingerprint(self) -> str:
        """Hash of everything that determines the response (not the item id)."""
        blob = json.dumps(
            {
                "model": self.model_id,
                "prompt": self.prompt,
                "image": self.image_sha256,
                "temperature": self.temperature,
                "max_tokens": self.max_output_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Provider(Protocol):
    model_id: str

    def complete(self, request: LmmRequest) -> str: ...


class ChatCompletionsProvider:
    """The widely used ``/chat/completions`` JSON wire format.

    The API key is read from the environment variable named by
    ``api_key_env`` at call time and never stored in configuration.
    Rate-limit and server errors are retried with exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        model_id: str,
        api_key_env: str = "OPENAI_API_KEY",
        max_retries: int = 4,
        backoff_s: float = 1.0,
        timeout: float = 120.0,
        rate_limit: float = 0.0,
        client: httpx.Client | None = None,
        sleep=time.sleep,
    ) -> None:
        self.endpoint = endpoint
        self.model_id = model_id
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.backoff_s = backoff_s
        self.limiter = RateLimiter(rate_limit)
        self.client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def payload(self, request: LmmRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": request.prompt}]
        if request.image is not None:
            b64 = base64.b64encode(request.image).decode("ascii")
            content.append({"type": "image_url", "image_url": {"url": f"data:image/png;base64,{b64}"}})
        return {
            "model": request.model_id,
            "messages": [{"role": "user", "content": content}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def complete(self, request: LmmRequest) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ProviderError(f"environment variable {self.api_key_env} is not set")
        headers = {"Authorization": f"Bearer {key}"}
        body = self.payload(request)
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_s * 2 ** (attempt - 1)
                log.info("retrying %s in %.1fs (%s)", request.item_id or "request", delay, last)
                self._sleep(delay)
            self.limiter.wait()
            try:
                resp = self.client.post(self.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = ProviderError(f"HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed response: {exc}") from exc
        raise ProviderError(f"gave up after {self.max_retries + 1} attempts: {last}")


class MockProvider:
    """Canned responses keyed by request fingerprint or item id."""

    def __init__(self, fixtures: Mapping[str, str], model_id: str = "mock") -> None:
        self.fixtures = dict(fixtures)
        self.model_id = model_id
        self.calls = 0
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path, model_id: str = "mock") -> MockProvider:
        return cls(json.loads(Path(path).read_text(encoding="utf-8")), model_id)

    def complete(self, request: LmmRequest) -> str:
        with self._lock:
            self.calls += 1
        for key in (request.fingerprint, request.item_id):
            if key is not None and key in self.fixtures:
                return self.fixtures[key]
        raise NoFixtureError(f"no fixture for item {request.item_id!r} (fingerprint {request.fingerprint[:12]})")


class ResponseCache:
    """Responses on disk keyed by request fingerprint."""

    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, fingerprint: str) -> Path:
        return self.root / fingerprint[:2] / f"{fingerprint}.json"

    def get(self, fingerprint: str) -> str | None:
        path = self._path(fingerprint)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["response"]

    def put(self, fingerprint: str, response: str) -> None:
        path = self._path(fingerprint)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump({"fingerprint": fingerprint, "response": response}, fh, ensure_ascii=False)
        os.replace(tmp, path)
