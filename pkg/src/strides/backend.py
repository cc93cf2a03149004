"""Chat-completion backends: a live HTTP client, a transcript replayer, and a recorder.

Every backend exposes ``complete(request) -> ChatResponse``. Replay keys are
``"{role_tag}#{index}"`` where ``index`` counts requests made under that role
tag, so a transcript replays in order per role.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol

import httpx

from .errors import (
    AuthMissing,
    Exhausted,
    MalformedObject,
    NoObjectFound,
    TranscriptMiss,
    UnbalancedBraces,
)

logger = logging.getLogger(__name__)

API_KEY_ENV = "STRIDES_API_KEY"
DEFAULT_URL = "https://api.openai.com/v1/chat/completions"
TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    role_tag: str
    temperature: float = 0.0
    max_tokens: int = 4096

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must lie in [0, 2], got {self.temperature}")
        if not self.role_tag:
            raise ValueError("role_tag must be non-empty")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    backend_id: str = ""
    estimated: bool = False

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be nonnegative")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> ChatResponse:
        return cls(
            text=raw["text"],
            prompt_tokens=int(raw.get("prompt_tokens", 0)),
            completion_tokens=int(raw.get("completion_tokens", 0)),
            backend_id=raw.get("backend_id", ""),
            estimated=bool(raw.get("estimated", False)),
        )


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


class Backend(Protocol):
    backend_id: str

    def complete(self, request: ChatRequest) -> ChatResponse: ...


def complete(request: ChatRequest, backend: Backend) -> ChatResponse:
    return backend.complete(request)


# ---------------------------------------------------------------------------
# Transcripts
# ---------------------------------------------------------------------------


def transcript_key(role_tag: str, index: int) -> str:
    return f"{role_tag}#{index}"


@dataclass
class Transcript:
    entries: list[tuple[str, ChatResponse]] = field(default_factory=list)

    def __post_init__(self):
        keys = [k for k, _ in self.entries]
        if len(set(keys)) != len(keys):
            raise ValueError("transcript keys must be unique")
        self._index = dict(self.entries)

    def get(self, key: str) -> ChatResponse | None:
        return self._index.get(key)

    def append(self, key: str, response: ChatResponse) -> None:
        if key in self._index:
            raise ValueError(f"duplicate transcript key {key!r}")
        self.entries.append((key, response))
        self._index[key] = response

    def __len__(self):
        return len(self.entries)

    @classmethod
    def from_responses(cls, by_role: dict[str, Iterable[str | ChatResponse]]) -> Transcript:
        """Build a transcript from ``{role_tag: [reply, ...]}``."""
        entries = []
        for role, replies in by_role.items():
            for i, reply in enumerate(replies):
                if isinstance(reply, str):
                    reply = ChatResponse(reply, 0, estimate_tokens(reply), "replay", True)
                entries.append((transcript_key(role, i), reply))
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> Transcript:
        entries = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    entries.append((rec["key"], ChatResponse.from_dict(rec["response"])))
        return cls(entries)

    def dumps(self) -> str:
        return "".join(
            json.dumps({"key": k, "response": r.to_dict()}, ensure_ascii=False) + "\n"
            for k, r in self.entries
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


class ReplayBackend:
    """Deterministic backend that answers from a transcript."""

    backend_id = "replay"

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            index = self._cursor.get(request.role_tag, 0)
            response = self.transcript.get(transcript_key(request.role_tag, index))
            if response is None:
                raise TranscriptMiss(request.role_tag, index)
            self._cursor[request.role_tag] = index + 1
        return response

    def reset(self) -> None:
        with self._lock:
            self._cursor.clear()


class ScriptedBackend:
    """Answers by calling ``responder(request) -> str``; useful for tests and demos."""

    backend_id = "scripted"

    def __init__(self, responder: Callable[[ChatRequest], str]):
        self.responder = responder
        self.requests: list[ChatRequest] = []
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.requests.append(request)
        text = self.responder(request)
        return ChatResponse(
            text,
            estimate_tokens(request.system_prompt + request.user_prompt),
            estimate_tokens(text),
            self.backend_id,
            True,
        )


class RecordingBackend:
    """Wraps a live backend and records every exchange into a transcript."""

    def __init__(self, inner: Backend, transcript: Transcript | None = None):
        self.inner = inner
        self.transcript = transcript if transcript is not None else Transcript()
        self.backend_id = getattr(inner, "backend_id", "recording")
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        with self._lock:
            index = self._cursor.get(request.role_tag, 0)
            self._cursor[request.role_tag] = index + 1
            self.transcript.append(transcript_key(request.role_tag, index), response)
        return response


# ---------------------------------------------------------------------------
# Remote
# ---------------------------------------------------------------------------


class RemoteBackend:
    """OpenAI-compatible chat-completions client with bounded exponential backoff."""

    def __init__(
        self,
        model: str,
        url: str = DEFAULT_URL,
        api_key_env: str = API_KEY_ENV,
        max_retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.api_key = os.environ.get(api_key_env)
        if not self.api_key:
            raise AuthMissing(api_key_env)
        self.model = model
        self.url = url
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep
        self.backend_id = f"remote:{model}"

    def _payload(self, request: ChatRequest) -> dict[str, Any]:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_prompt})
        return {
            "model": self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Authorization": f"Bearer {self.api_key}"}
        payload = self._payload(request)
        last_error = ""
        for attempt in range(self.max_retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.url, json=payload, headers=headers)
            except (httpx.TimeoutException, httpx.TransportError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                logger.warning("%s attempt %d: %s", request.role_tag, attempt, last_error)
                continue
            if resp.status_code in TRANSIENT_STATUS:
                last_error = f"HTTP {resp.status_code}"
                logger.warning("%s attempt %d: %s", request.role_tag, attempt, last_error)
                continue
            resp.raise_for_status()
            return self._parse(request, resp.json())
        raise Exhausted(self.max_retries, last_error)

    def _parse(self, request: ChatRequest, body: dict[str, Any]) -> ChatResponse:
        text = body["choices"][0]["message"]["content"] or ""
        usage = body.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return ChatResponse(text, int(usage["prompt_tokens"]), int(usage["completion_tokens"]), self.backend_id)
        return ChatResponse(
            text,
            estimate_tokens(request.system_prompt + request.user_prompt),
            estimate_tokens(text),
            self.backend_id,
            estimated=True,
        )


# ---------------------------------------------------------------------------
# Structured output extraction
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*\s*\n?(.*?)```", re.DOTALL)


def _balanced_object(text: str) -> str:
    start = text.find("{")
    if start < 0:
        raise NoObjectFound("no '{' in reply")
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[start : i + 1]
    raise UnbalancedBraces(f"object opened at offset {start} is never closed")


def extract_structured(text: str) -> Any:
    """Return the first top-level JSON object in a model reply.

    Code fences are stripped first; prose around the object is ignored.
    """
    fenced = _FENCE_RE.findall(text)
    candidates = [f for f in fenced if "{" in f] or [text]
    snippet = _balanced_object(candidates[0])
    try:
        return json.loads(snippet)
    except json.JSONDecodeError as exc:
        raise MalformedObject(f"{exc.msg} at offset {exc.pos}") from exc
