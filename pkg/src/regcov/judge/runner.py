"""Classifying records with a judge backend: retries, caching, rate limiting
and bounded concurrency."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from ..corpus import QuestionRecord
from ..errors import ConfigError, MalformedResponse, UnknownCode
from .backends import Backend, BackendError, ErrorKind
from .prompt import build_prompt
from .records import Classification
from .response import parse_response

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class JudgeConfig:
    model_id: str
    endpoint: str = ""
    max_retries: int = 3
    request_timeout: float = 60.0
    max_concurrency: int = 8
    rate_limit: float = 5.0  # dispatches per second
    cache_dir: str | Path | None = None
    reuse_cache: bool = True
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.1
    decoding: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.model_id:
            raise ConfigError("model_id must be non-empty")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if not self.rate_limit > 0:
            raise ConfigError("rate_limit must be > 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "JudgeConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown judge config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> dict[str, Any]:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["cache_dir"] = str(self.cache_dir) if self.cache_dir is not None else None
        return out


@dataclass(frozen=True)
class JudgeError:
    question_id: str
    kind: ErrorKind
    detail: str
    attempts: int
    benchmark: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"id": self.question_id, "benchmark": self.benchmark, "kind": self.kind.value,
                "detail": self.detail, "attempts": self.attempts}


class FileCache:
    """One JSON file per key. Reads are lock-free; writes to the same key are
    serialized and land atomically via rename."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    @staticmethod
    def key(model_id: str, prompt: str, decoding: dict[str, Any] | None = None) -> str:
        parts: list[Any] = [model_id, prompt]
        if decoding:
            parts.append(decoding)
        blob = json.dumps(parts, sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    def _path(self, key: str) -> Path:
        return self.dir / key[:2] / f"{key}.json"

    def get(self, key: str) -> str | None:
        try:
            data = json.loads(self._path(key).read_text("utf-8"))
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        return data.get("response")

    def put(self, key: str, model_id: str, response: str) -> None:
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        path = self._path(key)
        with lock:
            path.parent.mkdir(exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump({"model": model_id, "response": response}, fh, ensure_ascii=False)
            os.replace(tmp, path)

    def __len__(self) -> int:
        return sum(1 for _ in self.dir.glob("*/*.json"))


class RateLimiter:
    """Token bucket with capacity one: the k-th dispatch happens no earlier
    than ``k / rate`` seconds after the first."""

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if not rate > 0:
            raise ValueError("rate must be positive")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next: float | None = None

    def acquire(self) -> None:
        with self._lock:
            now = self._clock()
            slot = now if self._next is None else max(now, self._next)
            self._next = slot + self.interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)


def backoff_delay(config: JudgeConfig, retry: int, rng: random.Random | None = None) -> float:
    """Delay before retry number ``retry`` (1-based): base * factor**(retry-1), jittered."""
    delay = config.backoff_base * config.backoff_factor ** (retry - 1)
    if config.backoff_jitter:
        r = (rng or random).uniform(-config.backoff_jitter, config.backoff_jitter)
        delay *= 1.0 + r
    return max(0.0, delay)


def classify(record: QuestionRecord, backend: Backend, config: JudgeConfig, *,
             cache: FileCache | None = None, limiter: RateLimiter | None = None,
             sleep: Callable[[float], None] = time.sleep) -> Classification | JudgeError:
    """Classify one record. Never raises for judge failures; returns a
    :class:`JudgeError` instead.

    Transport, rate-limit and timeout failures are retried up to
    ``config.max_retries`` times with exponential backoff. A reply that
    cannot be parsed is retried once.
    """
    if cache is None and config.cache_dir is not None:
        cache = FileCache(config.cache_dir)
    prompt = build_prompt(record)
    key = FileCache.key(config.model_id, prompt, config.decoding) if cache is not None else None

    if cache is not None and config.reuse_cache:
        hit = cache.get(key)
        if hit is not None:
            try:
                caps, props = parse_response(hit)
                return Classification(record.id, record.benchmark, config.model_id, caps, props)
            except (MalformedResponse, UnknownCode):
                log.warning("discarding unparseable cache entry for %s", record.id)

    attempts = 0
    transient_retries = 0
    parse_retries = 0
    while True:
        attempts += 1
        if limiter is not None:
            limiter.acquire()
        try:
            text = backend(prompt, record)
            caps, props = parse_response(text)
        except BackendError as exc:
            kind, detail = exc.kind, exc.detail
            retry_ok = exc.retryable and kind is not ErrorKind.MALFORMED_RESPONSE
            if kind is ErrorKind.MALFORMED_RESPONSE:
                retry_ok = parse_retries < 1 and attempts <= config.max_retries
                parse_retries += 1
            elif retry_ok:
                retry_ok = transient_retries < config.max_retries and attempts <= config.max_retries
                transient_retries += 1
            if not retry_ok:
                return JudgeError(record.id, kind, detail, attempts, record.benchmark)
            delay = backoff_delay(config, attempts)
            if exc.retry_after is not None:
                delay = max(delay, exc.retry_after)
            log.debug("retrying %s after %s (%.2fs)", record.id, kind.value, delay)
            sleep(delay)
            continue
        except (MalformedResponse, UnknownCode) as exc:
            kind = ErrorKind.UNKNOWN_CODE if isinstance(exc, UnknownCode) else ErrorKind.MALFORMED_RESPONSE
            if parse_retries >= 1 or attempts > config.max_retries:
                return JudgeError(record.id, kind, str(exc), attempts, record.benchmark)
            parse_retries += 1
            continue

        if cache is not None:
            cache.put(key, config.model_id, text)
        return Classification(record.id, record.benchmark, config.model_id, caps, props)


@dataclass(frozen=True)
class ProgressEvent:
    done: int
    total: int
    question_id: str
    ok: bool
    elapsed: float


@dataclass
class BatchResult:
    classifications: list[Classification]
    errors: list[JudgeError]
    events: list[ProgressEvent]
    # per input record, either its classification or its error
    outcomes: list[Classification | JudgeError]


def classify_batch(records: Sequence[QuestionRecord], backend: Backend, config: JudgeConfig, *,
                   on_progress: Callable[[ProgressEvent], None] | None = None,
                   sleep: Callable[[float], None] = time.sleep) -> BatchResult:
    """Classify every record with at most ``config.max_concurrency`` calls in
    flight and at most ``config.rate_limit`` dispatches per second.

    Output order follows input order. With a cache directory configured,
    each success is written as soon as it arrives, so an interrupted run can
    be resumed without repeating finished calls.
    """
    cache = FileCache(config.cache_dir) if config.cache_dir is not None else None
    limiter = RateLimiter(config.rate_limit, sleep=sleep)
    outcomes: list[Classification | JudgeError | None] = [None] * len(records)
    events: list[ProgressEvent] = []
    lock = threading.Lock()
    stop = threading.Event()
    start = time.monotonic()

    def work(i: int) -> None:
        if stop.is_set():
            return
        try:
            res = classify(records[i], backend, config, cache=cache, limiter=limiter, sleep=sleep)
            with lock:
                outcomes[i] = res
                ev = ProgressEvent(len(events) + 1, len(records), records[i].id,
                                   isinstance(res, Classification), time.monotonic() - start)
                events.append(ev)
            if on_progress is not None:
                on_progress(ev)
        except BaseException:
            stop.set()
            raise

    pool = ThreadPoolExecutor(max_workers=config.max_concurrency)
    try:
        futures = [pool.submit(work, i) for i in range(len(records))]
        done_set, _ = wait(futures, return_when=FIRST_EXCEPTION)
        for f in futures:
            if f in done_set and f.exception() is not None:
                raise f.exception()
    except BaseException:
        # stop dispatching; calls already in flight finish and reach the cache
        stop.set()
        pool.shutdown(wait=True, cancel_futures=True)
        raise
    pool.shutdown(wait=True)

    done = [o for o in outcomes if o is not None]
    return BatchResult(
        classifications=[o for o in done if isinstance(o, Classification)],
        errors=[o for o in done if isinstance(o, JudgeError)],
        events=events,
        outcomes=done,
    )
