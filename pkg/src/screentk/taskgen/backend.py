"""Completion backends and the retrying ``complete`` call."""

from __future__ import annotations

import hashlib
import json
import logging
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import httpx

log = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3
DEFAULT_BASE_DELAY = 0.5
DEFAULT_TIMEOUT = 60.0


class BackendError(RuntimeError):
    """Permanent failure: the request will not succeed by retrying."""


class TransientBackendError(BackendError):
    """Failure worth retrying (5xx, rate limiting, dropped connection)."""


class BackendTimeout(TransientBackendError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "temperature": self.temperature, "max_tokens": self.max_tokens}

    def key(self) -> str:
        """Stable hash of the request, used to look up canned responses."""
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend: str
    attempts: int = 1


class Backend(Protocol):
    name: str

    def __call__(self, req: CompletionRequest) -> str: ...


class HttpBackend:
    """POSTs ``{prompt, temperature, max_tokens}`` and reads ``{text}``."""

    def __init__(self, url: str, timeout: float = DEFAULT_TIMEOUT, client: httpx.Client | None = None):
        self.url = url
        self.name = f"http:{url}"
        self._client = client or httpx.Client(timeout=timeout)

    def __call__(self, req: CompletionRequest) -> str:
        try:
            resp = self._client.post(self.url, json=req.to_dict())
        except httpx.TimeoutException as e:
            raise BackendTimeout(f"request to {self.url} timed out") from e
        except httpx.TransportError as e:
            raise TransientBackendError(f"transport error: {e}") from e
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientBackendError(f"backend returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(f"backend returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["text"]
        except (ValueError, KeyError, TypeError) as e:
            raise BackendError("backend response lacks a 'text' field") from e
        if not isinstance(text, str):
            raise BackendError("backend 'text' field is not a string")
        return text

    def close(self) -> None:
        self._client.close()


class FileStubBackend:
    """Canned responses from a JSON object mapping request keys to text."""

    def __init__(self, path: str | Path):
        self.name = f"stub:{Path(path).name}"
        with open(path, encoding="utf-8") as fh:
            self.responses: dict[str, str] = json.load(fh)

    def __call__(self, req: CompletionRequest) -> str:
        try:
            return self.responses[req.key()]
        except KeyError:
            raise BackendError(f"no canned response for request {req.key()[:12]}") from None


def complete(
    backend: Backend,
    req: CompletionRequest,
    *,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    base_delay: float = DEFAULT_BASE_DELAY,
    rng: random.Random | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> CompletionResult:
    """Call ``backend`` with exponential backoff and full jitter.

    Transient errors are retried until ``max_attempts`` calls have been
    made, after which a BackendError is raised; the last error is chained.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    rng = rng or random.Random()
    for attempt in range(1, max_attempts + 1):
        try:
            text = backend(req)
        except TransientBackendError as e:
            if attempt == max_attempts:
                raise BackendError(f"gave up after {attempt} attempts: {e}") from e
            delay = rng.uniform(0, base_delay * 2 ** (attempt - 1))
            log.warning("attempt %d failed (%s); retrying in %.2fs", attempt, e, delay)
            sleep(delay)
        else:
            return CompletionResult(text, getattr(backend, "name", "backend"), attempt)
    raise AssertionError("unreachable")
