"""Newline-delimited UTF-8 JSON helpers used by every on-disk format."""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Any, BinaryIO, Iterable, Iterator, TextIO, Union

from .errors import ParseError

Source = Union[bytes, str, Path, BinaryIO, TextIO]


def dumps_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def dump_bytes(objs: Iterable[Any]) -> bytes:
    return "".join(dumps_line(o) + "\n" for o in objs).encode("utf-8")


def _text_of(source: Source) -> str:
    if isinstance(source, Path):
        return source.read_bytes().decode("utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def iter_objects(source: Source) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, object)`` pairs; line numbers are 1-based.

    A ``str`` source is treated as file content, not a path.
    """
    try:
        text = _text_of(source)
    except UnicodeDecodeError as exc:
        raise ParseError(1, f"not valid UTF-8: {exc}") from exc
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            raise ParseError(lineno, "empty line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(lineno, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ParseError(lineno, "expected a JSON object")
        yield lineno, obj


def write_file(path: str | Path, objs: Iterable[Any]) -> None:
    Path(path).write_bytes(dump_bytes(objs))
