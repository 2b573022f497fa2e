"""Turning raw judge output into label sets."""

from __future__ import annotations

import json

from ..errors import MalformedResponse
from ..taxonomy import CategoryCode, Kind, parse_code

_decoder = json.JSONDecoder()


def first_json_object(text: str) -> dict:
    """Return the first JSON object embedded in ``text``.

    Prose and Markdown fences around the object are skipped. Raises
    :class:`MalformedResponse` if no object decodes.
    """
    if not isinstance(text, str):
        raise MalformedResponse(f"judge output is {type(text).__name__}, not text")
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = _decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            pos = text.find("{", pos + 1)
            continue
        if isinstance(obj, dict):
            return obj
        pos = text.find("{", pos + 1)
    raise MalformedResponse(f"no JSON object in judge output: {text[:200]!r}")


def _codes(obj: dict, key: str, kind: Kind) -> frozenset[CategoryCode]:
    if key not in obj:
        raise MalformedResponse(f"judge output lacks key {key!r}")
    items = obj[key]
    if not isinstance(items, list):
        raise MalformedResponse(f"{key!r} must be a list, got {type(items).__name__}")
    out = set()
    for item in items:
        if not isinstance(item, str):
            raise MalformedResponse(f"{key!r} entries must be strings, got {item!r}")
        code = parse_code(item.strip())
        if code.kind is not kind:
            raise MalformedResponse(f"{code} listed under {key!r}")
        out.add(code)
    return frozenset(out)


def parse_response(text: str) -> tuple[frozenset[CategoryCode], frozenset[CategoryCode]]:
    """``(capabilities, propensities)`` from a raw ``{"capab": [...], "prop": [...]}`` reply."""
    obj = first_json_object(text)
    return _codes(obj, "capab", Kind.CAPABILITY), _codes(obj, "prop", Kind.PROPENSITY)


def render_response(capabilities, propensities) -> str:
    """Inverse of :func:`parse_response`, codes in taxonomy order."""
    return json.dumps({
        "capab": [str(c) for c in sorted(capabilities)],
        "prop": [str(p) for p in sorted(propensities)],
    })
