"""Coverage statistics over classified questions.

A :class:`CoverageMatrix` counts, for every benchmark and category, how many
questions carry that label. From it (or from an explicit table of category
totals) come coverage tiers, normalized shares and systemic-risk coverage.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import DuplicateId, UnknownBenchmark
from .taxonomy import (
    CategoryCode,
    Kind,
    RiskMap,
    SystemicRisk,
    all_categories,
    capabilities,
    default_risk_map,
    parse_code,
    propensities,
)

ALL_CODES: tuple[CategoryCode, ...] = tuple(d.code for d in all_categories())

DENOMINATOR_MODES = ("labeled_questions", "all_questions")


def _mode(mode: str) -> str:
    aliases = {"labeled": "labeled_questions", "all": "all_questions"}
    mode = aliases.get(mode, mode)
    if mode not in DENOMINATOR_MODES:
        raise ValueError(f"denominator_mode must be one of {DENOMINATOR_MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class CoverageMatrix:
    """Benchmark x category question counts.

    ``labeled`` is the number of questions per benchmark with at least one
    label (``None`` when unknown, as for bundled reference counts); ``ingested`` is
    the number of questions in the corpus per benchmark.
    """

    benchmarks: tuple[str, ...]
    counts: Mapping[tuple[str, CategoryCode], int]
    ingested: Mapping[str, int]
    labeled: Mapping[str, int] | None = None

    def count(self, benchmark: str, code: CategoryCode | str) -> int:
        if isinstance(code, str):
            code = parse_code(code)
        return self.counts.get((benchmark, code), 0)

    @property
    def category_totals(self) -> dict[CategoryCode, int]:
        totals = {c: 0 for c in ALL_CODES}
        for (_, code), n in self.counts.items():
            totals[code] += n
        return totals

    def benchmark_label_sum(self, benchmark: str, family: Kind | None = None) -> int:
        return sum(n for (b, c), n in self.counts.items()
                   if b == benchmark and (family is None or c.kind is family))

    def merge(self, other: "CoverageMatrix") -> "CoverageMatrix":
        """Sum two matrices built over disjoint question sets."""
        benches = tuple(dict.fromkeys(self.benchmarks + other.benchmarks))
        counts = Counter(self.counts)
        counts.update(other.counts)
        ingested = Counter(self.ingested)
        ingested.update(other.ingested)
        labeled = None
        if self.labeled is not None and other.labeled is not None:
            labeled = Counter(self.labeled)
            labeled.update(other.labeled)
            labeled = dict(labeled)
        return CoverageMatrix(benches, dict(counts), dict(ingested), labeled)

    def to_json(self) -> dict[str, Any]:
        return {
            "benchmarks": list(self.benchmarks),
            "ingested": {b: self.ingested.get(b, 0) for b in self.benchmarks},
            "labeled": None if self.labeled is None else {b: self.labeled.get(b, 0) for b in self.benchmarks},
            "counts": {b: {str(c): self.count(b, c) for c in ALL_CODES} for b in self.benchmarks},
        }


def aggregate(classifications: Iterable[Any], corpus_size_per_benchmark: Mapping[str, int]) -> CoverageMatrix:
    """Count labels per benchmark. A question with k labels adds to k cells.

    ``classifications`` are objects with ``question_id``, ``benchmark``,
    ``capabilities`` and ``propensities``.
    """
    benches = tuple(corpus_size_per_benchmark)
    counts: Counter = Counter()
    labeled = {b: 0 for b in benches}
    seen: set[str] = set()
    for i, c in enumerate(classifications):
        if c.benchmark not in corpus_size_per_benchmark:
            raise UnknownBenchmark(c.benchmark)
        if c.question_id in seen:
            raise DuplicateId(c.question_id, i)
        seen.add(c.question_id)
        codes = set(c.capabilities) | set(c.propensities)
        if codes:
            labeled[c.benchmark] += 1
        for code in codes:
            counts[(c.benchmark, code)] += 1
    return CoverageMatrix(benches, dict(counts), dict(corpus_size_per_benchmark), labeled)


def normalized_share(matrix: CoverageMatrix, benchmark: str, category: CategoryCode | str,
                     denominator_mode: str = "labeled_questions") -> float:
    """Share of a benchmark's questions (labeled or all) that carry ``category``; 0 on an empty denominator."""
    mode = _mode(denominator_mode)
    if mode == "labeled_questions":
        if matrix.labeled is None:
            raise ValueError("labeled-question counts are unknown for this matrix")
        denom = matrix.labeled.get(benchmark, 0)
    else:
        denom = matrix.ingested.get(benchmark, 0)
    if denom == 0:
        return 0.0
    return matrix.count(benchmark, category) / denom


def avg_normalized(matrix: CoverageMatrix, category: CategoryCode | str,
                   denominator_mode: str = "labeled_questions") -> float:
    """Unweighted mean of :func:`normalized_share` over the matrix's benchmarks."""
    if not matrix.benchmarks:
        raise ValueError("matrix has no benchmarks")
    shares = [normalized_share(matrix, b, category, denominator_mode) for b in matrix.benchmarks]
    return sum(shares) / len(shares)


class CoverageTier(str, enum.Enum):
    DOMINANT = "Dominant"
    MODERATE = "Moderate"
    MINIMAL = "Minimal"
    ZERO = "Zero"


def tier(category_total: int) -> CoverageTier:
    """>10,000 Dominant; 1,000..10,000 Moderate; 1..999 Minimal; 0 Zero."""
    if category_total < 0:
        raise ValueError("category total must be nonnegative")
    if category_total > 10_000:
        return CoverageTier.DOMINANT
    if category_total >= 1_000:
        return CoverageTier.MODERATE
    if category_total > 0:
        return CoverageTier.MINIMAL
    return CoverageTier.ZERO


def round_pct(fraction: float | Fraction, places: int = 1) -> float:
    """Percentage rounded half-up (88.15 -> 88.2, not banker's rounding)."""
    pct = Decimal(str(float(fraction) * 100)) if not isinstance(fraction, Fraction) else \
        Decimal(fraction.numerator * 100) / Decimal(fraction.denominator)
    q = Decimal(1).scaleb(-places)
    return float(pct.quantize(q, rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class RiskCoverage:
    risk: SystemicRisk
    components: tuple[CategoryCode, ...]
    component_totals: dict[str, int]
    question_sum: int
    corpus_size: int

    @property
    def coverage(self) -> float:
        return self.question_sum / self.corpus_size

    @property
    def coverage_pct(self) -> float:
        """Coverage in percent, to 0.1 pp."""
        return round_pct(Fraction(self.question_sum, self.corpus_size))

    def to_json(self) -> dict[str, Any]:
        return {
            "risk": self.risk.value,
            "name": self.risk.display_name,
            "components": self.component_totals,
            "questions": self.question_sum,
            "coverage": self.coverage,
            "coverage_pct": self.coverage_pct,
        }


def _totals_of(source: CoverageMatrix | Mapping) -> dict[CategoryCode, int]:
    if isinstance(source, CoverageMatrix):
        return source.category_totals
    out = {c: 0 for c in ALL_CODES}
    for k, v in source.items():
        out[k if isinstance(k, CategoryCode) else parse_code(k)] = int(v)
    return out


def risk_coverage(matrix: CoverageMatrix | Mapping, risk_map: RiskMap | None = None,
                  corpus_size: int | None = None) -> list[RiskCoverage]:
    """Per risk, the sum of its components' category totals over the corpus size.

    Components are summed as they are: a question counted under two
    components, or under two risks, counts each time. ``matrix`` may also be
    a plain ``{code: total}`` mapping.
    """
    risk_map = risk_map if risk_map is not None else default_risk_map()
    if corpus_size is None:
        if not isinstance(matrix, CoverageMatrix):
            raise ValueError("corpus_size is required with a totals mapping")
        corpus_size = sum(matrix.ingested.values())
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    totals = _totals_of(matrix)
    out = []
    for risk in risk_map:
        comps = risk_map.ordered[risk]
        comp_totals = {str(c): totals.get(c, 0) for c in comps}
        out.append(RiskCoverage(risk, comps, comp_totals, sum(comp_totals.values()), corpus_size))
    return out


# ---------------------------------------------------------------------------
# Reference counts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceFixture:
    """The reference coverage tables: per-benchmark cells plus the totals
    printed alongside them."""

    matrix: CoverageMatrix
    category_totals: dict[CategoryCode, int]
    printed_totals: dict[str, Any]
    avg_normalized_pct: dict[CategoryCode, float]
    raw: dict[str, Any] = field(repr=False, default_factory=dict)

    @property
    def corpus_size(self) -> int:
        return sum(self.matrix.ingested.values())


def load_fixture(source: str | Path | Mapping | None = None) -> ReferenceFixture:
    if source is None:
        data = json.loads(resources.files("regcov.data").joinpath("reference_counts.json").read_text("utf-8"))
    elif isinstance(source, Mapping):
        data = dict(source)
    else:
        data = json.loads(Path(source).read_text("utf-8"))
    benches = tuple(data["benchmarks"])
    counts = {}
    for code_text, row in data["cells"].items():
        code = parse_code(code_text)
        if len(row) != len(benches):
            raise ValueError(f"row {code_text} has {len(row)} cells for {len(benches)} benchmarks")
        for b, n in zip(benches, row):
            if n:
                counts[(b, code)] = int(n)
    matrix = CoverageMatrix(benches, counts, {b: int(data["corpus_sizes"][b]) for b in benches}, None)
    return ReferenceFixture(
        matrix=matrix,
        category_totals={parse_code(k): int(v) for k, v in data["category_totals"].items()},
        printed_totals=data.get("printed_totals", {}),
        avg_normalized_pct={parse_code(k): float(v) for k, v in data.get("avg_normalized_pct", {}).items()},
        raw=data,
    )


def audit_fixture(fx: ReferenceFixture) -> list[dict[str, Any]]:
    """Every place where the reference numbers disagree with each other.

    Compares printed row, column and grand totals against the cells they
    summarize, and the category totals against the printed row totals.
    """
    issues: list[dict[str, Any]] = []
    m = fx.matrix
    cell_totals = m.category_totals
    for family_name, kind in (("capabilities", Kind.CAPABILITY), ("propensities", Kind.PROPENSITY)):
        printed = fx.printed_totals.get(family_name)
        if not printed:
            continue
        codes = [c for c in ALL_CODES if c.kind is kind]
        for code in codes:
            p = printed["rows"].get(str(code))
            if p is not None and p != cell_totals[code]:
                issues.append({"table": family_name, "what": f"row total {code}",
                               "printed": p, "sum_of_cells": cell_totals[code]})
        for b in m.benchmarks:
            p = printed["columns"].get(b)
            s = m.benchmark_label_sum(b, kind)
            if p is not None and p != s:
                issues.append({"table": family_name, "what": f"column total {b}",
                               "printed": p, "sum_of_cells": s})
        cells_grand = sum(cell_totals[c] for c in codes)
        if printed.get("grand") is not None and printed["grand"] != cells_grand:
            issues.append({"table": family_name, "what": "grand total", "printed": printed["grand"],
                           "sum_of_cells": cells_grand,
                           "sum_of_printed_rows": sum(printed["rows"].values()),
                           "sum_of_printed_columns": sum(printed["columns"].values())})
        for code in codes:
            p = printed["rows"].get(str(code))
            t = fx.category_totals.get(code)
            if p is not None and t is not None and p != t:
                issues.append({"table": "category_totals", "what": f"total {code}",
                               "printed": t, "coverage_table_row_total": p})
    return issues


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def tier_table(totals: Mapping[CategoryCode, int], avg_norm: Mapping[CategoryCode, float] | None = None
               ) -> list[dict[str, Any]]:
    """Rows sorted by tier, then by descending total, then taxonomy order."""
    order = list(CoverageTier)
    rows = []
    for d in all_categories():
        n = totals.get(d.code, 0)
        row = {"code": str(d.code), "name": d.name, "type": d.code.kind.label, "total": n, "tier": tier(n).value}
        if avg_norm is not None:
            row["avg_normalized"] = avg_norm.get(d.code)
        rows.append((order.index(tier(n)), -n, d.code, row))
    rows.sort(key=lambda r: r[:3])
    return [r[3] for r in rows]


def tiers_by_name(totals: Mapping[CategoryCode, int]) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {t.value: [] for t in CoverageTier}
    for row in tier_table(totals):
        out[row["tier"]].append(row["code"])
    return out


@dataclass
class AnalysisReport:
    matrix: CoverageMatrix
    totals: dict[CategoryCode, int]
    corpus_size: int
    denominator_mode: str
    risk: list[RiskCoverage]
    avg_normalized: dict[CategoryCode, float] | None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def grand_totals(self) -> dict[str, int]:
        return {
            "capabilities": sum(self.totals.get(c, 0) for c in capabilities()),
            "propensities": sum(self.totals.get(p, 0) for p in propensities()),
        }

    @property
    def tiers(self) -> dict[str, list[str]]:
        return tiers_by_name(self.totals)

    def heatmap(self) -> dict[str, Any]:
        """Per-benchmark share of questions carrying each category."""
        mode = self.metadata.get("denominator_mode_effective", self.denominator_mode)
        out: dict[str, Any] = {"denominator_mode": mode}
        for fam_name, codes in (("capabilities", capabilities()), ("propensities", propensities())):
            out[fam_name] = {
                b: {str(c): normalized_share(self.matrix, b, c, mode) for c in codes}
                for b in self.matrix.benchmarks
            }
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "matrix": self.matrix.to_json(),
            "category_totals": {str(c): self.totals.get(c, 0) for c in ALL_CODES},
            "grand_totals": self.grand_totals,
            "tiers": self.tiers,
            "tier_table": tier_table(self.totals, self.avg_normalized),
            "risk_coverage": [r.to_json() for r in self.risk],
            "metadata": {"denominator_mode": self.denominator_mode, "corpus_size": self.corpus_size,
                         **self.metadata},
        }


def analyze(matrix: CoverageMatrix, *, denominator_mode: str = "labeled_questions",
            risk_map: RiskMap | None = None, totals: Mapping[CategoryCode, int] | None = None,
            corpus_size: int | None = None, metadata: Mapping[str, Any] | None = None) -> AnalysisReport:
    """Tiers, normalized averages and risk coverage for one matrix.

    ``totals`` overrides the per-category totals derived from the cells; it
    is how printed totals are analysed when they differ from the cells.
    """
    mode = _mode(denominator_mode)
    meta: dict[str, Any] = dict(metadata or {})
    effective = mode
    if mode == "labeled_questions" and matrix.labeled is None:
        effective = "all_questions"
        meta["note"] = "labeled-question counts unavailable; shares use all ingested questions"
    meta["denominator_mode_effective"] = effective
    meta["totals_source"] = meta.get("totals_source", "cells" if totals is None else "explicit")
    risk_map = risk_map if risk_map is not None else default_risk_map()
    meta["risk_map"] = risk_map.to_json()
    tot = _totals_of(totals) if totals is not None else matrix.category_totals
    size = corpus_size if corpus_size is not None else sum(matrix.ingested.values())
    avg = {c: avg_normalized(matrix, c, effective) for c in ALL_CODES} if matrix.benchmarks else None
    return AnalysisReport(
        matrix=matrix,
        totals=tot,
        corpus_size=size,
        denominator_mode=mode,
        risk=risk_coverage(tot, risk_map, size) if size > 0 else [],
        avg_normalized=avg,
        metadata=meta,
    )


def analyze_fixture(fx: ReferenceFixture | None = None, *, denominator_mode: str = "labeled_questions",
                    risk_map: RiskMap | None = None) -> AnalysisReport:
    """Analyse the bundled reference counts, pinning category totals to the
    reference per-category totals (the figures the risk table uses)."""
    fx = fx if fx is not None else load_fixture()
    return analyze(
        fx.matrix,
        denominator_mode=denominator_mode,
        risk_map=risk_map,
        totals=fx.category_totals,
        corpus_size=fx.corpus_size,
        metadata={
            "totals_source": "reference category totals",
            "cell_grand_totals": {
                "capabilities": sum(fx.matrix.category_totals[c] for c in capabilities()),
                "propensities": sum(fx.matrix.category_totals[p] for p in propensities()),
            },
            "fixture_discrepancies": audit_fixture(fx),
        },
    )


def matrix_csv(matrix: CoverageMatrix, family: Kind) -> str:
    """Category rows x benchmark columns, with a total column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["code", "name", *matrix.benchmarks, "total"])
    for d in all_categories():
        if d.code.kind is not family:
            continue
        row = [matrix.count(b, d.code) for b in matrix.benchmarks]
        w.writerow([str(d.code), d.name, *row, sum(row)])
    return buf.getvalue()


def risk_markdown(risks: Sequence[RiskCoverage]) -> str:
    lines = ["| Systemic Risk | Key Components | Questions | Coverage |", "|---|---|---:|---:|"]
    for r in risks:
        comps = ", ".join(f"{c}: {n:,}" for c, n in r.component_totals.items())
        lines.append(f"| {r.risk.display_name} | {comps} | {r.question_sum:,} | {r.coverage_pct:.1f}% |")
    return "\n".join(lines) + "\n"


def tier_markdown(rows: Sequence[Mapping[str, Any]]) -> str:
    lines = ["| Category | Type | Total Questions | Tier | Avg. Normalized % |", "|---|---|---:|---|---:|"]
    for r in rows:
        avg = r.get("avg_normalized")
        avg_s = "" if avg is None else f"{avg * 100:.2f}%"
        lines.append(f"| {r['name']} ({r['code']}) | {r['type']} | {r['total']:,} | {r['tier']} | {avg_s} |")
    return "\n".join(lines) + "\n"
