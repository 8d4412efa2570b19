"""Chat-completion backends: live HTTP, transcript replay and scripted responses.

Every call produces an :class:`Exchange` keyed by a digest of the canonical
request, so that a transcript recorded once can be replayed bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Optional, Union

import httpx

from .errors import (
    HttpStatus,
    MissingTranscript,
    NetworkError,
    RateLimited,
    TranscriptIOError,
)
from .prompts import PromptBundle

__all__ = [
    "CompletionRequest",
    "Exchange",
    "HttpBackend",
    "ReplayBackend",
    "ScriptedBackend",
    "RecordingBackend",
    "canonical_request",
    "request_digest",
    "complete",
    "record",
    "load_transcript",
    "append_exchange",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: PromptBundle
    model: str
    temperature: float = 0.0
    max_tokens: Optional[int] = None

    def __post_init__(self):
        if not self.model or not self.model.strip():
            raise ValueError("model must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    def messages(self) -> list[dict]:
        return self.prompt.messages()


@dataclass(frozen=True)
class Exchange:
    request_digest: str
    prompt_text: str
    response_text: str
    model: str
    timestamp: str
    latency_ms: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "Exchange":
        return cls(
            request_digest=obj["request_digest"],
            prompt_text=obj["prompt_text"],
            response_text=obj["response_text"],
            model=obj["model"],
            timestamp=obj["timestamp"],
            latency_ms=int(obj["latency_ms"]),
        )


def _normalize_content(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n").strip()


def canonical_request(request: CompletionRequest) -> str:
    """Key-sorted compact JSON of everything that determines the response."""
    body = {
        "model": request.model.strip(),
        "temperature": float(request.temperature),
        "max_tokens": request.max_tokens,
        "messages": [
            {"role": m["role"], "content": _normalize_content(m["content"])}
            for m in request.messages()
        ],
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def request_digest(request: CompletionRequest) -> str:
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")


# --------------------------------------------------------------------------
# transcripts

def load_transcript(path: Union[str, Path]) -> dict[str, Exchange]:
    """Index a JSONL transcript by digest; later lines win over earlier ones."""
    index: dict[str, Exchange] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    ex = Exchange.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise TranscriptIOError(f"{path}:{lineno}: bad transcript line ({exc})") from exc
                index[ex.request_digest] = ex
    except OSError as exc:
        raise TranscriptIOError(f"cannot read transcript {path}: {exc}") from exc
    return index


_append_lock = threading.Lock()


def append_exchange(path: Union[str, Path], exchange: Exchange) -> None:
    line = json.dumps(exchange.to_dict(), ensure_ascii=False, sort_keys=True) + "\n"
    with _append_lock:
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line)
        except OSError as exc:
            raise TranscriptIOError(f"cannot append to transcript {path}: {exc}") from exc


# --------------------------------------------------------------------------
# backends

class ReplayBackend:
    """Serves recorded responses; an unknown request is an error, never a live call."""

    def __init__(self, transcript: Union[str, Path, Mapping[str, Exchange]]):
        if isinstance(transcript, Mapping):
            self._index = dict(transcript)
            self.path = None
        else:
            self.path = Path(transcript)
            self._index = load_transcript(self.path)

    def __len__(self) -> int:
        return len(self._index)

    def complete(self, request: CompletionRequest) -> Exchange:
        digest = request_digest(request)
        try:
            return self._index[digest]
        except KeyError:
            raise MissingTranscript(digest) from None


class ScriptedBackend:
    """Answers from a digest->response map, falling back to ``responder`` if given.

    ``responder`` receives the request and returns the response text; it lets
    tests script answers without computing digests by hand.
    """

    def __init__(self, responses: Optional[Mapping[str, str]] = None,
                 responder: Optional[Callable[[CompletionRequest], str]] = None,
                 timestamp: str = "1970-01-01T00:00:00Z"):
        self.responses = dict(responses or {})
        self.responder = responder
        self.timestamp = timestamp

    def complete(self, request: CompletionRequest) -> Exchange:
        digest = request_digest(request)
        if digest in self.responses:
            text = self.responses[digest]
        elif self.responder is not None:
            text = self.responder(request)
        else:
            raise MissingTranscript(digest)
        return Exchange(digest, request.prompt.text, text, request.model, self.timestamp, 0)


_RETRY_STATUS = {429, 500, 502, 503, 504}


class HttpBackend:
    """OpenAI-compatible ``/chat/completions`` client with retries and a concurrency cap."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None, *,
                 api_key_file: Union[str, Path, None] = None,
                 max_attempts: int = 3, backoff: float = 1.0, timeout: float = 120.0,
                 concurrency: int = 4, transport: Optional[httpx.BaseTransport] = None,
                 sleep: Callable[[float], None] = time.sleep):
        if api_key is None and api_key_file is not None:
            api_key = Path(api_key_file).read_text(encoding="utf-8").strip()
        if api_key is None:
            api_key = os.environ.get("LLM_API_KEY")
        url = endpoint.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        self.url = url
        self._api_key = api_key
        self.max_attempts = max_attempts
        self.backoff = backoff
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(concurrency)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def __repr__(self) -> str:
        return f"HttpBackend({self.url!r})"

    def close(self) -> None:
        self._client.close()

    def _body(self, request: CompletionRequest) -> dict:
        body = {
            "model": request.model,
            "messages": request.messages(),
            "temperature": float(request.temperature),
        }
        if request.max_tokens is not None:
            body["max_tokens"] = request.max_tokens
        return body

    def complete(self, request: CompletionRequest) -> Exchange:
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        body = self._body(request)
        last_error: Optional[Exception] = None
        with self._slots:
            for attempt in range(1, self.max_attempts + 1):
                started = time.monotonic()
                try:
                    resp = self._client.post(self.url, json=body, headers=headers)
                except httpx.TransportError as exc:
                    last_error = NetworkError(f"{type(exc).__name__}: {exc}")
                else:
                    if resp.status_code == 200:
                        latency = int((time.monotonic() - started) * 1000)
                        return Exchange(
                            request_digest(request), request.prompt.text,
                            _first_choice(resp), request.model, _now(), latency,
                        )
                    if resp.status_code == 429:
                        last_error = RateLimited(f"rate limited after {attempt} attempt(s)")
                    elif resp.status_code in _RETRY_STATUS:
                        last_error = HttpStatus(resp.status_code, resp.text)
                    else:
                        raise HttpStatus(resp.status_code, resp.text)
                log.warning("attempt %d/%d to %s failed: %s",
                            attempt, self.max_attempts, self.url, last_error)
                if attempt < self.max_attempts:
                    self._sleep(self.backoff * 2 ** (attempt - 1))
        raise last_error


def _first_choice(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise HttpStatus(resp.status_code, f"unexpected response body: {resp.text[:200]}") from exc
    return content if content is not None else ""


class RecordingBackend:
    """Wraps another backend and appends every exchange to a JSONL transcript."""

    def __init__(self, inner, transcript_path: Union[str, Path]):
        self.inner = inner
        self.path = Path(transcript_path)
        try:
            self.path.open("a", encoding="utf-8").close()
        except OSError as exc:
            raise TranscriptIOError(f"cannot open transcript {self.path}: {exc}") from exc

    def complete(self, request: CompletionRequest) -> Exchange:
        exchange = self.inner.complete(request)
        append_exchange(self.path, exchange)
        return exchange


def complete(request: CompletionRequest, backend) -> Exchange:
    return backend.complete(request)


def record(request: CompletionRequest, backend, transcript_path: Union[str, Path]) -> Exchange:
    """Complete ``request`` and append the exchange to ``transcript_path``."""
    return RecordingBackend(backend, transcript_path).complete(request)
