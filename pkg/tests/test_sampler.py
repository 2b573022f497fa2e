import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest
from hypothesis import assume, given, settings, strategies as st

from regcov.corpus import QuestionRecord
from regcov.errors import AllocationExceedsStratum, InfeasibleBudget
from regcov.sampler import Allocation, allocate, draw, largest_remainder, strata_sizes, stratum_rng

TABLE5 = {"BBH": 6511, "BBQ": 58492, "CommonsenseQA": 10962, "HLE": 2500, "MMLU": 115700, "TruthfulQA": 790}


def make_corpus(sizes):
    return [QuestionRecord(f"{b}_{i}", b, f"q{i}") for b, n in sizes.items() for i in range(n)]


def brute_force_hamilton(weights, seats):
    """Enumerate every way to hand out the leftover seats and keep the one whose
    recipients have the largest remainders (ties: alphabetically first)."""
    names = sorted(weights)
    total = sum(weights.values())
    quotas = {n: Fraction(seats * weights[n], total) for n in names}
    base = {n: math.floor(q) for n, q in quotas.items()}
    left = seats - sum(base.values())
    best = None
    for chosen in itertools.combinations(names, left):
        key = sorted(((-(quotas[n] - base[n]), n) for n in chosen))
        if best is None or key < best[0]:
            best = (key, chosen)
    out = dict(base)
    for n in best[1]:
        out[n] += 1
    return out


def test_table5_allocation():
    a = allocate(TABLE5, 600, 30)
    assert a.targets["BBH"] == a.targets["CommonsenseQA"] == a.targets["HLE"] == a.targets["TruthfulQA"] == 30
    assert a.targets == {"BBH": 30, "BBQ": 161, "CommonsenseQA": 30, "HLE": 30, "MMLU": 319, "TruthfulQA": 30}
    assert a.total == 600
    assert a.proportional == {"BBH": 20, "BBQ": 180, "CommonsenseQA": 34, "HLE": 8, "MMLU": 356, "TruthfulQA": 2}


def test_allocation_deterministic():
    first = allocate(TABLE5, 600, 30)
    assert all(allocate(TABLE5, 600, 30) == first for _ in range(100))
    shuffled = dict(reversed(list(TABLE5.items())))
    assert allocate(shuffled, 600, 30).targets == first.targets


@pytest.mark.parametrize("sizes,budget,m", [
    ({"a": 10}, 0, 0),
    ({"a": 10, "b": 10}, 50, 30),
    ({}, 10, 1),
    ({"a": 0}, 10, 1),
    ({"a": 5}, 10, -1),
])
def test_infeasible(sizes, budget, m):
    with pytest.raises(InfeasibleBudget):
        allocate(sizes, budget, m)


def test_small_stratum_takes_everything():
    a = allocate({"a": 1000, "tiny": 3}, 100, 10)
    assert a.targets == {"a": 97, "tiny": 3}


def test_budget_exceeds_corpus():
    a = allocate({"a": 4, "b": 6}, 100, 2)
    assert a.targets == {"a": 4, "b": 6}


def test_tie_goes_to_first_name():
    assert largest_remainder({"b": 1, "a": 1}, 1) == {"a": 1, "b": 0}
    assert largest_remainder({"x": 1, "y": 1, "z": 1}, 2) == {"x": 1, "y": 1, "z": 0}


weights = st.dictionaries(st.text("abcdef", min_size=1, max_size=3), st.integers(1, 500), min_size=1, max_size=6)


@given(weights, st.integers(0, 60))
def test_largest_remainder_matches_brute_force(w, seats):
    assert largest_remainder(w, seats) == brute_force_hamilton(w, seats)


@settings(max_examples=200)
@given(weights, st.integers(1, 400), st.integers(0, 40))
def test_allocation_invariants(sizes, budget, m):
    assume(len(sizes) * m <= budget)
    a = allocate(sizes, budget, m)
    assert a.total == min(budget, sum(sizes.values()))
    for n, t in a.targets.items():
        assert min(m, sizes[n]) <= t <= sizes[n]
    assert set(a.targets) == set(sizes)
    assert Allocation.from_json(a.to_json()) == a


def test_draw_sizes_order_and_reproducibility():
    sizes = {"a": 50, "b": 20, "c": 7}
    corpus = make_corpus(sizes)
    alloc = allocate(sizes, 30, 5)
    s1 = draw(corpus, alloc, seed=7)
    s2 = draw(corpus, alloc, seed=7)
    assert s1.ids() == s2.ids()
    assert Counter(r.benchmark for r in s1.records) == Counter(alloc.targets)
    positions = [corpus.index(r) for r in s1.records]
    assert positions == sorted(positions)
    assert len(set(s1.ids())) == len(s1.ids())
    assert draw(corpus, alloc, seed=8).ids() != s1.ids()
    assert strata_sizes(corpus) == sizes


def test_stratum_draw_independent_of_other_strata():
    corpus = make_corpus({"a": 40, "b": 40})
    only_a = [r for r in corpus if r.benchmark == "a"]
    both = draw(corpus, Allocation({"a": 6, "b": 6}, 12, 0), seed=3)
    alone = draw(only_a, Allocation({"a": 6}, 6, 0), seed=3)
    assert [r.id for r in both.records if r.benchmark == "a"] == alone.ids()


def test_stratum_rng_stable():
    assert stratum_rng(1, "x").random() == stratum_rng(1, "x").random()
    assert stratum_rng(1, "x").random() != stratum_rng(1, "y").random()


def test_draw_exceeding_stratum():
    corpus = make_corpus({"a": 3})
    with pytest.raises(AllocationExceedsStratum):
        draw(corpus, Allocation({"a": 4}, 4, 0), seed=0)


def test_inclusion_frequencies_are_uniform():
    # every one of N items is included with probability k/N; over 1,000 seeds
    # each count should sit within 5 standard deviations of 1000*k/N
    n_items, k, runs = 20, 5, 1000
    corpus = make_corpus({"s": n_items})
    alloc = Allocation({"s": k}, k, 0)
    counts = Counter()
    for seed in range(runs):
        counts.update(draw(corpus, alloc, seed).ids())
    p = k / n_items
    mean, sd = runs * p, math.sqrt(runs * p * (1 - p))
    assert len(counts) == n_items
    for rid, c in counts.items():
        assert abs(c - mean) <= 5 * sd, (rid, c)


def test_sidecar_is_json():
    import json

    corpus = make_corpus({"a": 10})
    s = draw(corpus, allocate({"a": 10}, 4, 1), seed=11)
    data = json.loads(s.sidecar())
    assert data["seed"] == 11 and data["allocation"]["targets"] == {"a": 4}
