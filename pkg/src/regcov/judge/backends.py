"""Judge backends.

A backend is any callable ``backend(prompt, record) -> str`` returning the raw
model text. Failures are signalled with :class:`BackendError`. Backends are
called from worker threads and must be thread-safe.
"""

from __future__ import annotations

import enum
import os
import threading
from typing import Any, Iterable, Mapping, Protocol

import requests

from ..corpus import QuestionRecord
from ..errors import ConfigError
from ..taxonomy import CategoryCode, Kind, parse_code
from .response import render_response

API_KEY_ENV = "REGCOV_API_KEY"


class ErrorKind(str, enum.Enum):
    TRANSPORT = "Transport"
    RATE_LIMITED = "RateLimited"
    MALFORMED_RESPONSE = "MalformedResponse"
    UNKNOWN_CODE = "UnknownCode"
    TIMEOUT = "Timeout"


class BackendError(Exception):
    """A failed judge call. ``retryable`` is False for permanent failures (e.g. HTTP 401)."""

    def __init__(self, kind: ErrorKind, detail: str, retryable: bool = True,
                 retry_after: float | None = None):
        super().__init__(f"{kind.value}: {detail}")
        self.kind = kind
        self.detail = detail
        self.retryable = retryable
        self.retry_after = retry_after


class Backend(Protocol):
    def __call__(self, prompt: str, record: QuestionRecord) -> str: ...


class MockBackend:
    """Deterministic keyword judge for offline runs.

    ``rule_table`` maps a keyword to one code or a list of codes. A rule
    fires when the keyword occurs in the question text, compared
    case-insensitively. The reply is the JSON the real judge is asked for.
    """

    def __init__(self, rule_table: Mapping[str, str | Iterable[str]]):
        rules = []
        for keyword, codes in rule_table.items():
            if isinstance(codes, (str, CategoryCode)):
                codes = [codes]
            parsed = [c if isinstance(c, CategoryCode) else parse_code(c) for c in codes]
            rules.append((keyword.lower(), tuple(parsed)))
        self.rules = tuple(rules)
        self._lock = threading.Lock()
        self.calls = 0
        self.seen: list[str] = []

    def labels(self, question: str) -> set[CategoryCode]:
        text = question.lower()
        out: set[CategoryCode] = set()
        for keyword, codes in self.rules:
            if keyword in text:
                out.update(codes)
        return out

    def __call__(self, prompt: str, record: QuestionRecord) -> str:
        with self._lock:
            self.calls += 1
            self.seen.append(record.id)
        codes = self.labels(record.question)
        return render_response(
            [c for c in codes if c.kind is Kind.CAPABILITY],
            [c for c in codes if c.kind is Kind.PROPENSITY],
        )


def mock_backend(rule_table: Mapping[str, str | Iterable[str]]) -> MockBackend:
    return MockBackend(rule_table)


class HttpBackend:
    """POSTs a chat-completion request and returns the first choice's text."""

    def __init__(self, endpoint: str, model_id: str, api_key: str | None = None,
                 timeout: float = 60.0, decoding: Mapping[str, Any] | None = None,
                 session: requests.Session | None = None):
        if api_key is None:
            api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"live judge needs an API key in ${API_KEY_ENV}")
        if not endpoint:
            raise ConfigError("live judge needs an endpoint URL")
        self.endpoint = endpoint
        self.model_id = model_id
        self.timeout = timeout
        self.decoding = dict(decoding or {})
        self._headers = {"Authorization": f"Bearer {api_key}", "Content-Type": "application/json"}
        self._local = threading.local()
        self._session = session

    def _sess(self) -> requests.Session:
        if self._session is not None:
            return self._session
        # requests.Session is not documented as thread-safe; one per thread
        s = getattr(self._local, "session", None)
        if s is None:
            s = self._local.session = requests.Session()
        return s

    def request_body(self, prompt: str) -> dict[str, Any]:
        return {"model": self.model_id, "messages": [{"role": "user", "content": prompt}], **self.decoding}

    def __call__(self, prompt: str, record: QuestionRecord | None = None) -> str:
        try:
            resp = self._sess().post(self.endpoint, json=self.request_body(prompt),
                                     headers=self._headers, timeout=self.timeout)
        except requests.Timeout as exc:
            raise BackendError(ErrorKind.TIMEOUT, str(exc)) from exc
        except requests.RequestException as exc:
            raise BackendError(ErrorKind.TRANSPORT, str(exc)) from exc

        if resp.status_code == 429:
            raise BackendError(ErrorKind.RATE_LIMITED, "HTTP 429",
                               retry_after=_retry_after(resp.headers.get("Retry-After")))
        if resp.status_code >= 500:
            raise BackendError(ErrorKind.TRANSPORT, f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendError(ErrorKind.TRANSPORT, f"HTTP {resp.status_code}: {resp.text[:200]}",
                               retryable=False)
        try:
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(ErrorKind.MALFORMED_RESPONSE,
                               f"unexpected completion payload: {resp.text[:200]}") from exc
        if not isinstance(content, str):
            raise BackendError(ErrorKind.MALFORMED_RESPONSE, "completion content is not text")
        return content


def _retry_after(value: str | None) -> float | None:
    if not value:
        return None
    try:
        return max(0.0, float(value))
    except ValueError:
        return None
