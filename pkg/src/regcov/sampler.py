"""Stratified gold-standard sampling.

Allocation is proportional (largest remainder, exact rational arithmetic)
with a per-stratum floor; selection inside each stratum is uniform without
replacement from a generator seeded by ``(seed, benchmark)``.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from .corpus import QuestionRecord
from .errors import AllocationExceedsStratum, InfeasibleBudget

__all__ = ["Allocation", "Sample", "largest_remainder", "allocate", "draw", "stratum_rng"]


@dataclass(frozen=True)
class Allocation:
    targets: dict[str, int]
    budget: int
    min_per_stratum: int
    # plain proportional apportionment of the budget, before any floor or cap
    proportional: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.targets.values())

    def to_json(self) -> dict[str, Any]:
        return {
            "budget": self.budget,
            "min_per_stratum": self.min_per_stratum,
            "targets": dict(self.targets),
            "proportional": dict(self.proportional),
            "total": self.total,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Allocation":
        return cls(
            targets={k: int(v) for k, v in data["targets"].items()},
            budget=int(data["budget"]),
            min_per_stratum=int(data["min_per_stratum"]),
            proportional={k: int(v) for k, v in data.get("proportional", {}).items()},
        )


def largest_remainder(weights: Mapping[str, int], seats: int) -> dict[str, int]:
    """Hamilton apportionment of ``seats`` by ``weights``.

    Ties in the fractional remainder go to the alphabetically first name, so
    the result does not depend on the mapping's insertion order.
    """
    names = sorted(weights)
    if seats < 0:
        raise ValueError("seats must be nonnegative")
    if not names:
        return {}
    total = sum(weights[n] for n in names)
    if total <= 0:
        raise ValueError("weights must sum to a positive number")
    quotas = {n: Fraction(seats * weights[n], total) for n in names}
    out = {n: math.floor(q) for n, q in quotas.items()}
    left = seats - sum(out.values())
    by_remainder = sorted(names, key=lambda n: (-(quotas[n] - out[n]), n))
    for n in by_remainder[:left]:
        out[n] += 1
    return out


def allocate(strata_sizes: Mapping[str, int], budget: int, min_per_stratum: int) -> Allocation:
    """Split ``budget`` across strata proportionally with a floor per stratum.

    Steps: apportion the budget by stratum share; lift any stratum below the
    floor to ``min(min_per_stratum, size)``; re-apportion what is left among
    the strata that were not lifted; cap at stratum size. Lifting and capping
    repeat until no stratum changes, so the targets always sum to
    ``min(budget, sum(sizes))``.
    """
    if budget < 1:
        raise InfeasibleBudget(f"budget must be >= 1, got {budget}")
    if min_per_stratum < 0:
        raise InfeasibleBudget(f"min_per_stratum must be >= 0, got {min_per_stratum}")
    if not strata_sizes:
        raise InfeasibleBudget("no strata given")
    for name, size in strata_sizes.items():
        if size <= 0:
            raise InfeasibleBudget(f"stratum {name!r} has size {size}")
    if len(strata_sizes) * min_per_stratum > budget:
        raise InfeasibleBudget(
            f"{len(strata_sizes)} strata x {min_per_stratum} minimum exceeds budget {budget}"
        )

    sizes = {n: int(strata_sizes[n]) for n in sorted(strata_sizes)}
    proportional = largest_remainder(sizes, budget)
    fixed: dict[str, int] = {}
    while True:
        free = {n: s for n, s in sizes.items() if n not in fixed}
        if not free:
            targets = fixed
            break
        remaining = budget - sum(fixed.values())
        provisional = largest_remainder(free, remaining)
        raised = {
            n: min(min_per_stratum, sizes[n])
            for n, t in provisional.items()
            if t < min(min_per_stratum, sizes[n])
        }
        if raised:
            fixed.update(raised)
            continue
        capped = {n: sizes[n] for n, t in provisional.items() if t > sizes[n]}
        if capped:
            fixed.update(capped)
            continue
        targets = {**fixed, **provisional}
        break

    return Allocation(
        targets={n: targets[n] for n in sizes},
        budget=budget,
        min_per_stratum=min_per_stratum,
        proportional=proportional,
    )


def stratum_rng(seed: int, benchmark: str) -> random.Random:
    """Generator for one stratum: SHA-256 of ``"<seed>:<benchmark>"`` seeds a Mersenne Twister."""
    digest = hashlib.sha256(f"{int(seed)}:{benchmark}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass(frozen=True)
class Sample:
    records: list[QuestionRecord]
    seed: int
    allocation: Allocation

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def sidecar(self) -> str:
        return json.dumps({"seed": self.seed, "allocation": self.allocation.to_json()}, indent=2) + "\n"


def draw(corpus: Sequence[QuestionRecord], allocation: Allocation, seed: int) -> Sample:
    """Select ``allocation.targets[b]`` records from each benchmark ``b``.

    The returned records keep their relative corpus order.
    """
    by_stratum: dict[str, list[int]] = defaultdict(list)
    for pos, rec in enumerate(corpus):
        by_stratum[rec.benchmark].append(pos)

    chosen: set[int] = set()
    for name in sorted(allocation.targets):
        target = allocation.targets[name]
        members = by_stratum.get(name, [])
        if target > len(members):
            raise AllocationExceedsStratum(name, target, len(members))
        if target < 0:
            raise ValueError(f"negative target for {name!r}")
        rng = stratum_rng(seed, name)
        chosen.update(members[i] for i in rng.sample(range(len(members)), target))

    records = [corpus[p] for p in sorted(chosen)]
    return Sample(records=records, seed=int(seed), allocation=allocation)


def strata_sizes(records: Iterable[QuestionRecord]) -> dict[str, int]:
    sizes: dict[str, int] = defaultdict(int)
    for r in records:
        sizes[r.benchmark] += 1
    return dict(sizes)
