"""Benchmark corpus ingestion, normalization and persistence.

Raw benchmark files go through a format adapter (``jsonl``, ``csv``,
``mc_json`` or ``passthrough``) configured by an :class:`AdapterDescriptor`
that says which source field holds the question, answer, choices and so on.
The output is a list of :class:`QuestionRecord` which can be written to and
read back from a normalized JSONL corpus file.
"""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, BinaryIO, Callable, Iterable, Mapping, Sequence, Union

from . import jsonl
from .errors import DuplicateId, EmptyCorpus, MalformedSource, MissingField, ParseError

__all__ = [
    "QuestionRecord",
    "AdapterDescriptor",
    "CorpusStats",
    "ADAPTERS",
    "ingest",
    "save_corpus",
    "load_corpus",
    "read_corpus",
    "write_corpus",
    "corpus_stats",
    "load_descriptor",
]

RECORD_FIELDS = ("id", "benchmark", "question", "answer", "choices", "context", "category", "metadata")


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    benchmark: str
    question: str
    answer: str = ""
    choices: tuple[str, ...] = ()
    context: str = ""
    category: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        # accept lists for convenience; store an immutable tuple
        if not isinstance(self.choices, tuple):
            object.__setattr__(self, "choices", tuple(self.choices))
        if not isinstance(self.metadata, dict):
            object.__setattr__(self, "metadata", dict(self.metadata))

    __hash__ = None  # metadata is a dict

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "benchmark": self.benchmark,
            "question": self.question,
            "answer": self.answer,
            "choices": list(self.choices),
            "context": self.context,
            "category": self.category,
            "metadata": dict(self.metadata),
        }

    def problems(self) -> list[str]:
        """Names of the fields that break the record invariants."""
        bad = []
        for name in ("id", "benchmark", "question"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                bad.append(name)
        for name in ("answer", "context", "category"):
            if not isinstance(getattr(self, name), str):
                bad.append(name)
        if not all(isinstance(c, str) for c in self.choices):
            bad.append("choices")
        if not all(isinstance(k, str) and isinstance(v, str) for k, v in self.metadata.items()):
            bad.append("metadata")
        return bad


@dataclass(frozen=True)
class AdapterDescriptor:
    """Where each record field lives in a source record.

    ``choices`` is either one source field (holding a list, or a JSON array
    string in CSV) or a list of column names, one choice per column.
    ``id=None`` means ordinal ids ``<benchmark>_<index>``.
    """

    question: str = "question"
    answer: str | None = "answer"
    choices: str | list[str] | None = "choices"
    context: str | None = "context"
    category: str | None = "category"
    id: str | None = None
    answer_is_letter_key: bool = False
    answer_is_index: bool = False

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "AdapterDescriptor":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown descriptor keys: {sorted(unknown)}")
        return cls(**data)

    def mapped_fields(self) -> set[str]:
        out = {self.question}
        for name in (self.answer, self.context, self.category, self.id):
            if name:
                out.add(name)
        if isinstance(self.choices, str):
            out.add(self.choices)
        elif self.choices:
            out.update(self.choices)
        return out


def load_descriptor(path: str | Path) -> AdapterDescriptor:
    with open(path, encoding="utf-8") as fh:
        return AdapterDescriptor.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Source readers: each yields (record_index, line_or_None, raw dict)
# ---------------------------------------------------------------------------

RawInput = Union[bytes, str, Path, BinaryIO]


def _read_bytes(raw: RawInput) -> bytes:
    if isinstance(raw, Path):
        return raw.read_bytes()
    if isinstance(raw, str):
        return raw.encode("utf-8")
    if isinstance(raw, bytes):
        return raw
    data = raw.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def _decode(raw: RawInput) -> str:
    try:
        return _read_bytes(raw).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedSource(f"not valid UTF-8: {exc}") from exc


def _jsonl_rows(raw: RawInput):
    text = _decode(raw)
    index = 0
    for lineno, line in enumerate(io.StringIO(text), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedSource(f"invalid JSON: {exc.msg}", index=index, line=lineno) from exc
        if not isinstance(obj, dict):
            raise MalformedSource("expected a JSON object", index=index, line=lineno)
        yield index, lineno, obj
        index += 1


def _csv_rows(raw: RawInput):
    text = _decode(raw)
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        return
    for index, row in enumerate(reader):
        if None in row:
            raise MalformedSource("row has more cells than the header", index=index, line=reader.line_num)
        yield index, reader.line_num, row


def _json_document_rows(raw: RawInput):
    text = _decode(raw)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedSource(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if isinstance(doc, dict):
        for key in ("data", "questions", "examples", "records"):
            if isinstance(doc.get(key), list):
                doc = doc[key]
                break
        else:
            raise MalformedSource("JSON document has no list of records")
    if not isinstance(doc, list):
        raise MalformedSource("JSON document must be a list of records")
    for index, obj in enumerate(doc):
        if not isinstance(obj, dict):
            raise MalformedSource("expected a JSON object", index=index)
        yield index, None, obj


# ---------------------------------------------------------------------------
# Field mapping
# ---------------------------------------------------------------------------


def _as_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, float, bool)):
        return json.dumps(value)
    return json.dumps(value, ensure_ascii=False)


def _choices_of(raw: Mapping[str, Any], desc: AdapterDescriptor, index: int, line: int | None) -> list[str]:
    if not desc.choices:
        return []
    if isinstance(desc.choices, list):
        return [_as_text(raw.get(c)) for c in desc.choices if _as_text(raw.get(c)) != ""]
    value = raw.get(desc.choices)
    if value is None or value == "":
        return []
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            raise MalformedSource(f"field {desc.choices!r} is not a JSON array", index=index, line=line) from None
    if isinstance(value, dict):
        # {"label": [...], "text": [...]} layout (e.g. CommonsenseQA)
        if isinstance(value.get("text"), list):
            value = value["text"]
        else:
            value = list(value.values())
    if not isinstance(value, list):
        raise MalformedSource(f"field {desc.choices!r} is not a list", index=index, line=line)
    return [_as_text(v) for v in value]


def _resolve_answer(answer: str, choices: list[str], desc: AdapterDescriptor,
                    index: int, line: int | None, metadata: dict[str, str]) -> str:
    if desc.answer_is_letter_key and answer != "":
        key = answer.strip()
        if len(key) != 1 or not key.isalpha() or not key.isupper():
            raise MalformedSource(f"answer {answer!r} is not a letter key", index=index, line=line)
        pos = ord(key) - ord("A")
        if pos >= len(choices):
            raise MalformedSource(f"answer key {key!r} has no matching choice", index=index, line=line)
        metadata["answer_key"] = key
        return choices[pos]
    if desc.answer_is_index and answer != "":
        try:
            pos = int(answer)
        except ValueError:
            raise MalformedSource(f"answer {answer!r} is not a choice index", index=index, line=line) from None
        if not 0 <= pos < len(choices):
            raise MalformedSource(f"answer index {pos} has no matching choice", index=index, line=line)
        metadata["answer_index"] = str(pos)
        return choices[pos]
    return answer


def _map_record(benchmark: str, index: int, line: int | None, raw: Mapping[str, Any],
                desc: AdapterDescriptor) -> QuestionRecord:
    question = _as_text(raw.get(desc.question))
    if not question.strip():
        raise MissingField("question", index)

    if desc.id:
        native = _as_text(raw.get(desc.id)).strip()
        if not native:
            raise MissingField(desc.id, index)
        rid = native if native.startswith(f"{benchmark}_") else f"{benchmark}_{native}"
    else:
        rid = f"{benchmark}_{index}"

    choices = _choices_of(raw, desc, index, line)
    metadata: dict[str, str] = {}
    answer = _as_text(raw.get(desc.answer)) if desc.answer else ""
    answer = _resolve_answer(answer, choices, desc, index, line, metadata)

    mapped = desc.mapped_fields()
    for key, value in raw.items():
        if key not in mapped and key not in metadata:
            metadata[str(key)] = _as_text(value)

    return QuestionRecord(
        id=rid,
        benchmark=benchmark,
        question=question,
        answer=answer,
        choices=tuple(choices),
        context=_as_text(raw.get(desc.context)) if desc.context else "",
        category=_as_text(raw.get(desc.category)) if desc.category else "",
        metadata=metadata,
    )


def _mapped(reader: Callable[[RawInput], Iterable]):
    def adapter(benchmark: str, raw: RawInput, desc: AdapterDescriptor) -> list[QuestionRecord]:
        return [_map_record(benchmark, i, line, obj, desc) for i, line, obj in reader(raw)]
    return adapter


def _mc_json(benchmark: str, raw: RawInput, desc: AdapterDescriptor) -> list[QuestionRecord]:
    if not desc.answer_is_letter_key and not desc.answer_is_index:
        desc = replace(desc, answer_is_letter_key=True)
    return [_map_record(benchmark, i, line, obj, desc) for i, line, obj in _json_document_rows(raw)]


def _passthrough(benchmark: str, raw: RawInput, desc: AdapterDescriptor) -> list[QuestionRecord]:
    try:
        records = load_corpus(_read_bytes(raw))
    except ParseError as exc:
        raise MalformedSource(exc.detail, line=exc.line) from exc
    for i, rec in enumerate(records):
        if rec.benchmark != benchmark:
            raise MalformedSource(
                f"record benchmark {rec.benchmark!r} does not match {benchmark!r}", index=i, line=i + 1
            )
    return records


ADAPTERS: dict[str, Callable[[str, RawInput, AdapterDescriptor], list[QuestionRecord]]] = {
    "jsonl": _mapped(_jsonl_rows),
    "csv": _mapped(_csv_rows),
    "mc_json": _mc_json,
    "passthrough": _passthrough,
}


def ingest(benchmark_name: str, adapter_id: str, raw_input: RawInput,
           descriptor: AdapterDescriptor | Mapping[str, Any] | None = None) -> list[QuestionRecord]:
    """Normalize one raw benchmark source into question records, in source order.

    ``raw_input`` may be bytes, a binary stream or a :class:`~pathlib.Path`;
    a ``str`` is taken as the file content itself.
    """
    if not benchmark_name or not benchmark_name.strip():
        raise ValueError("benchmark name must be non-empty")
    try:
        adapter = ADAPTERS[adapter_id]
    except KeyError:
        raise ValueError(f"unknown adapter {adapter_id!r}; choose from {sorted(ADAPTERS)}") from None
    if descriptor is None:
        descriptor = AdapterDescriptor()
    elif not isinstance(descriptor, AdapterDescriptor):
        descriptor = AdapterDescriptor.from_json(descriptor)
    records = adapter(benchmark_name, raw_input, descriptor)
    _check_unique(records)
    return records


def _check_unique(records: Iterable[QuestionRecord]) -> None:
    seen: set[str] = set()
    for i, rec in enumerate(records):
        if rec.id in seen:
            raise DuplicateId(rec.id, i)
        seen.add(rec.id)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_corpus(records: Sequence[QuestionRecord]) -> bytes:
    """Serialize records as newline-delimited UTF-8 JSON."""
    _check_unique(records)
    return jsonl.dump_bytes(r.to_json() for r in records)


def load_corpus(stream: jsonl.Source) -> list[QuestionRecord]:
    records = []
    seen: set[str] = set()
    for lineno, obj in jsonl.iter_objects(stream):
        if set(obj) != set(RECORD_FIELDS):
            missing = sorted(set(RECORD_FIELDS) - set(obj))
            extra = sorted(set(obj) - set(RECORD_FIELDS))
            raise ParseError(lineno, f"record fields mismatch (missing {missing}, unexpected {extra})")
        if not isinstance(obj["choices"], list) or not isinstance(obj["metadata"], dict):
            raise ParseError(lineno, "choices must be a list and metadata an object")
        rec = QuestionRecord(**obj)
        bad = rec.problems()
        if bad:
            raise ParseError(lineno, f"invalid field(s): {', '.join(bad)}")
        if rec.id in seen:
            raise DuplicateId(rec.id, lineno - 1)
        seen.add(rec.id)
        records.append(rec)
    return records


def write_corpus(path: str | Path, records: Sequence[QuestionRecord]) -> None:
    Path(path).write_bytes(save_corpus(records))


def read_corpus(path: str | Path) -> list[QuestionRecord]:
    return load_corpus(Path(path))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorpusStats:
    counts: dict[str, int]
    total: int

    @property
    def fractions(self) -> dict[str, float]:
        return {b: n / self.total for b, n in self.counts.items()}

    def to_json(self) -> dict[str, Any]:
        return {"total": self.total, "counts": dict(self.counts), "fractions": self.fractions}


def corpus_stats(records: Iterable[QuestionRecord] | Mapping[str, int]) -> CorpusStats:
    """Per-benchmark question counts and shares of the total.

    Accepts either records or a ready ``{benchmark: count}`` mapping.
    """
    if isinstance(records, Mapping):
        counts = {b: int(n) for b, n in records.items()}
    else:
        counts = dict(Counter(r.benchmark for r in records))
    if any(n < 0 for n in counts.values()):
        raise ValueError("counts must be nonnegative")
    total = sum(counts.values())
    if total == 0:
        raise EmptyCorpus("corpus has no records")
    return CorpusStats(counts=counts, total=total)
