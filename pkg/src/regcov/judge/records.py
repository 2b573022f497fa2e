"""Classification results and their enriched on-disk form."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .. import jsonl
from ..errors import ParseError, UnknownCode
from ..taxonomy import CategoryCode, Kind, category, code_for_name, parse_code


@dataclass(frozen=True)
class Classification:
    question_id: str
    benchmark: str
    model_id: str
    capabilities: frozenset[CategoryCode] = frozenset()
    propensities: frozenset[CategoryCode] = frozenset()

    def __post_init__(self):
        caps = frozenset(c if isinstance(c, CategoryCode) else parse_code(c) for c in self.capabilities)
        props = frozenset(p if isinstance(p, CategoryCode) else parse_code(p) for p in self.propensities)
        if any(c.kind is not Kind.CAPABILITY for c in caps):
            raise ValueError(f"non-capability code in capabilities: {sorted(caps)}")
        if any(p.kind is not Kind.PROPENSITY for p in props):
            raise ValueError(f"non-propensity code in propensities: {sorted(props)}")
        object.__setattr__(self, "capabilities", caps)
        object.__setattr__(self, "propensities", props)

    @property
    def labels(self) -> frozenset[CategoryCode]:
        return self.capabilities | self.propensities


def enrich(c: Classification) -> dict[str, Any]:
    """The final dataset record: metadata plus ``{display name: 1}`` per label."""
    return {
        "model": c.model_id,
        "id": c.question_id,
        "benchmark": c.benchmark,
        "evaluation": {
            "capabilities": {category(code).name: 1 for code in sorted(c.capabilities)},
            "propensities": {category(code).name: 1 for code in sorted(c.propensities)},
        },
    }


def from_enriched(obj: Mapping[str, Any]) -> Classification:
    """Read an enriched record back into a :class:`Classification`.

    Raises ``KeyError``/``TypeError``/``ValueError`` on a badly shaped object
    and :class:`UnknownCode` for a category name not in the taxonomy.
    """
    ev = obj["evaluation"]
    caps = [code_for_name(n) for n, v in ev["capabilities"].items() if v]
    props = [code_for_name(n) for n, v in ev["propensities"].items() if v]
    for field in ("model", "id", "benchmark"):
        if not isinstance(obj[field], str):
            raise TypeError(f"{field} must be a string")
    return Classification(obj["id"], obj["benchmark"], obj["model"], frozenset(caps), frozenset(props))


def dump_enriched(classifications: Iterable[Classification]) -> bytes:
    return jsonl.dump_bytes(enrich(c) for c in classifications)


def load_enriched(source: jsonl.Source) -> list[Classification]:
    out = []
    for lineno, obj in jsonl.iter_objects(source):
        try:
            out.append(from_enriched(obj))
        except UnknownCode as exc:
            raise ParseError(lineno, str(exc)) from exc
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(lineno, f"not an enriched record: {exc!r}") from exc
    return out


def write_enriched(path: str | Path, classifications: Iterable[Classification]) -> None:
    Path(path).write_bytes(dump_enriched(classifications))


def read_enriched(path: str | Path) -> list[Classification]:
    return load_enriched(Path(path))
