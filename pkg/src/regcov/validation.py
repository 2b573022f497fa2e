"""Judge validation against gold annotations.

Metrics are micro-averaged within a label family: every question x label
pair in the family is one binary decision, and precision, recall, F1 and
Cohen's kappa are computed over the pooled decisions.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from . import jsonl
from .errors import (
    DegenerateMarginals,
    DuplicateId,
    LengthMismatch,
    MissingPrediction,
    NoOverlap,
    ParseError,
    UnknownCode,
)
from .taxonomy import CategoryCode, Kind, capabilities, parse_code, propensities

CONSENSUS_ANNOTATOR = "consensus"

FAMILIES = (Kind.CAPABILITY, Kind.PROPENSITY)


class HasLabels(Protocol):
    capabilities: frozenset[CategoryCode]
    propensities: frozenset[CategoryCode]


@dataclass(frozen=True)
class LabelSets:
    capabilities: frozenset[CategoryCode] = frozenset()
    propensities: frozenset[CategoryCode] = frozenset()


def family_codes(family: Kind) -> list[CategoryCode]:
    return capabilities() if family is Kind.CAPABILITY else propensities()


def _labels(obj: HasLabels | tuple, family: Kind) -> frozenset[CategoryCode]:
    if isinstance(obj, tuple):
        caps, props = obj
    else:
        caps, props = obj.capabilities, obj.propensities
    return frozenset(caps if family is Kind.CAPABILITY else props)


# ---------------------------------------------------------------------------
# Gold annotations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldAnnotation:
    question_id: str
    annotator_id: str
    capabilities: frozenset[CategoryCode] = frozenset()
    propensities: frozenset[CategoryCode] = frozenset()
    rationale: str | None = None

    def __post_init__(self):
        caps = frozenset(c if isinstance(c, CategoryCode) else parse_code(c) for c in self.capabilities)
        props = frozenset(p if isinstance(p, CategoryCode) else parse_code(p) for p in self.propensities)
        if any(c.kind is not Kind.CAPABILITY for c in caps) or any(p.kind is not Kind.PROPENSITY for p in props):
            raise ValueError(f"label kind mismatch for {self.question_id}/{self.annotator_id}")
        object.__setattr__(self, "capabilities", caps)
        object.__setattr__(self, "propensities", props)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "question_id": self.question_id,
            "annotator_id": self.annotator_id,
            "capab": [str(c) for c in sorted(self.capabilities)],
            "prop": [str(p) for p in sorted(self.propensities)],
        }
        if self.rationale is not None:
            out["rationale"] = self.rationale
        return out


def load_gold(source: jsonl.Source) -> list[GoldAnnotation]:
    """Read ``{question_id, annotator_id, capab, prop, rationale?}`` lines."""
    out = []
    seen: set[tuple[str, str]] = set()
    for lineno, obj in jsonl.iter_objects(source):
        try:
            qid, aid = obj["question_id"], obj["annotator_id"]
            if not isinstance(qid, str) or not isinstance(aid, str) or not qid or not aid:
                raise ValueError("question_id and annotator_id must be non-empty strings")
            caps, props = obj["capab"], obj["prop"]
            if not isinstance(caps, list) or not isinstance(props, list):
                raise ValueError("capab and prop must be lists")
            ann = GoldAnnotation(qid, aid, frozenset(caps), frozenset(props), obj.get("rationale"))
        except UnknownCode as exc:
            raise ParseError(lineno, str(exc)) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(lineno, f"not a gold annotation: {exc}") from exc
        if (qid, aid) in seen:
            raise DuplicateId(f"{qid}/{aid}", lineno - 1)
        seen.add((qid, aid))
        out.append(ann)
    return out


def dump_gold(annotations: Iterable[GoldAnnotation]) -> bytes:
    return jsonl.dump_bytes(a.to_json() for a in annotations)


def read_gold(path: str | Path) -> list[GoldAnnotation]:
    return load_gold(Path(path))


# ---------------------------------------------------------------------------
# Consensus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsensusResult:
    question_id: str
    capabilities: frozenset[CategoryCode]
    propensities: frozenset[CategoryCode]
    source: str  # "manual", "vote" or "single"
    tied: frozenset[CategoryCode] = frozenset()

    @property
    def needs_review(self) -> bool:
        return bool(self.tied)


def consensus_merge(annotations: Sequence[GoldAnnotation]) -> ConsensusResult:
    """Merge the annotations of one question.

    A recorded manual consensus (annotator ``"consensus"``) wins outright.
    Otherwise each label is included on a strict majority; a label chosen by
    exactly half the annotators is included and listed in ``tied`` so a
    human can review it.
    """
    if not annotations:
        raise ValueError("consensus_merge needs at least one annotation")
    qids = {a.question_id for a in annotations}
    if len(qids) != 1:
        raise ValueError(f"annotations span several questions: {sorted(qids)}")
    qid = next(iter(qids))

    manual = [a for a in annotations if a.annotator_id == CONSENSUS_ANNOTATOR]
    if manual:
        m = manual[-1]
        return ConsensusResult(qid, m.capabilities, m.propensities, "manual")

    if len(annotations) == 1:
        a = annotations[0]
        return ConsensusResult(qid, a.capabilities, a.propensities, "single")

    n = len(annotations)
    votes: dict[CategoryCode, int] = defaultdict(int)
    for a in annotations:
        for code in a.capabilities | a.propensities:
            votes[code] += 1
    chosen = {c for c, v in votes.items() if 2 * v >= n}
    tied = frozenset(c for c, v in votes.items() if 2 * v == n)
    return ConsensusResult(
        qid,
        frozenset(c for c in chosen if c.kind is Kind.CAPABILITY),
        frozenset(c for c in chosen if c.kind is Kind.PROPENSITY),
        "vote",
        tied,
    )


def build_gold(annotations: Iterable[GoldAnnotation]) -> tuple[dict[str, LabelSets], list[ConsensusResult]]:
    """Collapse all annotations to one label set per question.

    Returns the gold map and the merge results that need review.
    """
    by_q: dict[str, list[GoldAnnotation]] = defaultdict(list)
    for a in annotations:
        by_q[a.question_id].append(a)
    gold: dict[str, LabelSets] = {}
    review = []
    for qid in sorted(by_q):
        res = consensus_merge(by_q[qid])
        gold[qid] = LabelSets(res.capabilities, res.propensities)
        if res.needs_review:
            review.append(res)
    return gold, review


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn)

    def to_json(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def _check_ids(predictions: Mapping[str, Any], gold: Mapping[str, Any]) -> list[str]:
    missing = [q for q in gold if q not in predictions]
    if missing:
        raise MissingPrediction(missing)
    return sorted(gold)


def confusion(predictions: Mapping[str, HasLabels], gold: Mapping[str, HasLabels | tuple],
              family: Kind) -> ConfusionCounts:
    """Pooled counts over every (gold question, family label) pair."""
    ids = _check_ids(predictions, gold)
    n_labels = family.size
    tp = fp = fn = 0
    for qid in ids:
        pred = _labels(predictions[qid], family)
        true = _labels(gold[qid], family)
        tp += len(pred & true)
        fp += len(pred - true)
        fn += len(true - pred)
    tn = len(ids) * n_labels - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def micro_prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """Precision, recall and F1 from pooled counts.

    With no positives at all (``tp + fp == 0`` and ``tp + fn == 0``) the
    judge agrees perfectly and all three are 1.0. Otherwise an empty
    denominator gives 0.0 for that metric, and F1 is 0.0 when P + R is 0.
    """
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    if tp + fp == 0 and tp + fn == 0:
        return 1.0, 1.0, 1.0
    p = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    r = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
    return float(p), float(r), float(f1)


def cohen_kappa(rater_a: Sequence[bool | int], rater_b: Sequence[bool | int]) -> float:
    """Cohen's kappa for two aligned binary decision sequences."""
    if len(rater_a) != len(rater_b):
        raise LengthMismatch(f"{len(rater_a)} vs {len(rater_b)} decisions")
    n = len(rater_a)
    if n == 0:
        raise DegenerateMarginals("no decisions to compare")
    a = [bool(x) for x in rater_a]
    b = [bool(x) for x in rater_b]
    agree = sum(1 for x, y in zip(a, b) if x == y)
    a1 = sum(a)
    b1 = sum(b)
    p_o = Fraction(agree, n)
    p_e = Fraction(a1 * b1 + (n - a1) * (n - b1), n * n)
    if p_e == 1:
        if p_o == 1:
            return 1.0
        raise DegenerateMarginals("expected agreement is 1 but observed agreement is not")
    return float((p_o - p_e) / (1 - p_e))


_BANDS = (
    (Fraction(0), "poor"),
    (Fraction(20, 100), "slight"),
    (Fraction(40, 100), "fair"),
    (Fraction(60, 100), "moderate"),
    (Fraction(80, 100), "substantial"),
)


def kappa_band(kappa: float) -> str:
    """Landis-Koch label; each band includes its upper bound (0.60 is "moderate")."""
    k = Fraction(kappa).limit_denominator(10**12) if isinstance(kappa, float) else Fraction(kappa)
    for upper, name in _BANDS:
        if k <= upper:
            return name
    return "almost perfect"


def pooled_decisions(a: Mapping[str, HasLabels | tuple], b: Mapping[str, HasLabels | tuple],
                     ids: Iterable[str], family: Kind) -> tuple[list[bool], list[bool]]:
    """Flatten two label maps to aligned binary decisions, question-major."""
    codes = family_codes(family)
    xa: list[bool] = []
    xb: list[bool] = []
    for qid in ids:
        la, lb = _labels(a[qid], family), _labels(b[qid], family)
        for c in codes:
            xa.append(c in la)
            xb.append(c in lb)
    return xa, xb


@dataclass(frozen=True)
class FamilyMetrics:
    precision: float
    recall: float
    f1: float
    kappa: float
    kappa_band: str
    counts: ConfusionCounts
    per_label_kappa: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "kappa": self.kappa,
            "kappa_band": self.kappa_band,
            "counts": self.counts.to_json(),
            "per_label_kappa": dict(self.per_label_kappa),
        }


@dataclass(frozen=True)
class MetricsReport:
    model_id: str
    n_questions: int
    capabilities: FamilyMetrics
    propensities: FamilyMetrics
    averaging: str = "micro"

    def family(self, kind: Kind) -> FamilyMetrics:
        return self.capabilities if kind is Kind.CAPABILITY else self.propensities

    def to_json(self) -> dict[str, Any]:
        return {
            "model": self.model_id,
            "n_questions": self.n_questions,
            "averaging": self.averaging,
            "capabilities": self.capabilities.to_json(),
            "propensities": self.propensities.to_json(),
        }


def family_metrics(predictions: Mapping[str, HasLabels], gold: Mapping[str, HasLabels | tuple],
                   family: Kind) -> FamilyMetrics:
    ids = _check_ids(predictions, gold)
    counts = confusion(predictions, gold, family)
    p, r, f1 = micro_prf(counts)
    xp, xg = pooled_decisions(predictions, gold, ids, family)
    kappa = cohen_kappa(xp, xg)
    per_label = {}
    n_codes = family.size
    for j, code in enumerate(family_codes(family)):
        per_label[str(code)] = cohen_kappa(xp[j::n_codes], xg[j::n_codes])
    return FamilyMetrics(p, r, f1, kappa, kappa_band(kappa), counts, per_label)


def evaluate(predictions: Mapping[str, HasLabels], gold: Mapping[str, HasLabels | tuple],
             model_id: str) -> MetricsReport:
    """Score one judge's predictions against the gold labels of every gold question."""
    _check_ids(predictions, gold)
    return MetricsReport(
        model_id=model_id,
        n_questions=len(gold),
        capabilities=family_metrics(predictions, gold, Kind.CAPABILITY),
        propensities=family_metrics(predictions, gold, Kind.PROPENSITY),
    )


def metrics_markdown(reports: Sequence[MetricsReport], digits: int = 2) -> str:
    """Markdown table with Precision, Recall, F1 and Kappa for both families."""
    cols = ["Precision", "Recall", "F1", "Kappa"]
    header = ["Model"] + [f"Capabilities {c}" for c in cols] + [f"Propensities {c}" for c in cols]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join(["---"] + ["---:"] * 8) + "|"]
    for rep in reports:
        cells = [rep.model_id]
        for fam in (rep.capabilities, rep.propensities):
            cells += [f"{v:.{digits}f}" for v in (fam.precision, fam.recall, fam.f1, fam.kappa)]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Inter-rater agreement
# ---------------------------------------------------------------------------


def interrater_agreement(annotations: Iterable[GoldAnnotation],
                         overlap_only: bool = True) -> dict[tuple[str, str], dict[Kind, float]]:
    """Pairwise kappa per family over each annotator pair's shared questions.

    Pairs that share no question are left out. If no pair shares anything,
    :class:`NoOverlap` is raised when ``overlap_only`` is set; otherwise the
    empty matrix is returned. Manual consensus records are ignored.
    """
    by_annotator: dict[str, dict[str, GoldAnnotation]] = defaultdict(dict)
    for a in annotations:
        if a.annotator_id == CONSENSUS_ANNOTATOR:
            continue
        by_annotator[a.annotator_id][a.question_id] = a

    matrix: dict[tuple[str, str], dict[Kind, float]] = {}
    for x, y in itertools.combinations(sorted(by_annotator), 2):
        shared = sorted(set(by_annotator[x]) & set(by_annotator[y]))
        if not shared:
            continue
        matrix[(x, y)] = {
            fam: cohen_kappa(*pooled_decisions(by_annotator[x], by_annotator[y], shared, fam))
            for fam in FAMILIES
        }
    if not matrix and overlap_only:
        raise NoOverlap("no two annotators share a question")
    return matrix
