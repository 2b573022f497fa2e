"""Exception types shared across the toolkit."""

from __future__ import annotations


class RegcovError(Exception):
    """Base class for every error raised by regcov."""


class UnknownCode(RegcovError, ValueError):
    def __init__(self, text: str):
        super().__init__(f"unknown category code: {text!r}")
        self.text = text


class UnknownRisk(RegcovError, KeyError):
    def __init__(self, name: str):
        super().__init__(f"unknown systemic risk: {name!r}")
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


class MalformedSource(RegcovError):
    """``index`` is the 0-based record index, ``line`` the 1-based source line."""

    def __init__(self, detail: str, index: int | None = None, line: int | None = None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif index is not None:
            where = f" (record {index})"
        super().__init__(f"malformed source{where}: {detail}")
        self.detail = detail
        self.index = index
        self.line = line


class MissingField(RegcovError):
    def __init__(self, field: str, index: int):
        super().__init__(f"missing field {field!r} in record {index}")
        self.field = field
        self.index = index


class DuplicateId(RegcovError):
    def __init__(self, record_id: str, index: int | None = None):
        where = f" at record {index}" if index is not None else ""
        super().__init__(f"duplicate id {record_id!r}{where}")
        self.record_id = record_id
        self.index = index


class ParseError(RegcovError):
    """A line of a JSONL file could not be decoded. ``line`` is 1-based."""

    def __init__(self, line: int, detail: str):
        super().__init__(f"line {line}: {detail}")
        self.line = line
        self.detail = detail


class EmptyCorpus(RegcovError):
    pass


class InfeasibleBudget(RegcovError):
    pass


class AllocationExceedsStratum(RegcovError):
    def __init__(self, benchmark: str, target: int, available: int):
        super().__init__(
            f"allocation for {benchmark!r} is {target} but only {available} records exist"
        )
        self.benchmark = benchmark
        self.target = target
        self.available = available


class MalformedResponse(RegcovError):
    pass


class ConfigError(RegcovError):
    pass


class MissingPrediction(RegcovError):
    def __init__(self, question_ids):
        ids = sorted(question_ids)
        super().__init__(f"no prediction for {len(ids)} gold question(s): {', '.join(ids[:10])}")
        self.question_ids = ids


class LengthMismatch(RegcovError):
    pass


class DegenerateMarginals(RegcovError):
    pass


class NoOverlap(RegcovError):
    pass


class UnknownBenchmark(RegcovError):
    def __init__(self, benchmark: str):
        super().__init__(f"classification references unknown benchmark {benchmark!r}")
        self.benchmark = benchmark
