"""LLM-as-judge classification of benchmark questions."""

from .backends import API_KEY_ENV, Backend, BackendError, ErrorKind, HttpBackend, MockBackend, mock_backend
from .prompt import PROMPT_TEMPLATE, build_prompt
from .records import (
    Classification,
    dump_enriched,
    enrich,
    from_enriched,
    load_enriched,
    read_enriched,
    write_enriched,
)
from .response import first_json_object, parse_response, render_response
from .runner import (
    BatchResult,
    FileCache,
    JudgeConfig,
    JudgeError,
    ProgressEvent,
    RateLimiter,
    backoff_delay,
    classify,
    classify_batch,
)

__all__ = [
    "API_KEY_ENV", "Backend", "BackendError", "ErrorKind", "HttpBackend", "MockBackend", "mock_backend",
    "PROMPT_TEMPLATE", "build_prompt",
    "Classification", "enrich", "from_enriched", "dump_enriched", "load_enriched", "read_enriched",
    "write_enriched",
    "first_json_object", "parse_response", "render_response",
    "BatchResult", "FileCache", "JudgeConfig", "JudgeError", "ProgressEvent", "RateLimiter",
    "backoff_delay", "classify", "classify_batch",
]
