"""Score a judge against a small gold standard built from two annotators.

Run: python demos/04_validate_judge.py
"""

from regcov.judge import Classification
from regcov.taxonomy import parse_code
from regcov.validation import GoldAnnotation, build_gold, evaluate, interrater_agreement, metrics_markdown


def codes(*names):
    return frozenset(parse_code(n) for n in names)


annotations = [
    GoldAnnotation("q1", "alice", codes("C1"), codes("P6")),
    GoldAnnotation("q1", "bob", codes("C1"), codes("P6")),
    GoldAnnotation("q2", "alice", codes(), codes("P4")),
    GoldAnnotation("q2", "bob", codes(), codes("P4", "P3")),
    GoldAnnotation("q3", "alice", codes("C6"), codes("P5")),
    GoldAnnotation("q3", "bob", codes("C6"), codes()),
    GoldAnnotation("q3", "consensus", codes("C6"), codes("P5")),
    GoldAnnotation("q4", "alice", codes(), codes("P3")),
]
gold, review = build_gold(annotations)
print("gold:", {q: sorted(map(str, s.capabilities | s.propensities)) for q, s in gold.items()})
print("needs review:", [(r.question_id, sorted(map(str, r.tied))) for r in review])

for pair, ks in interrater_agreement(annotations).items():
    print("kappa", pair, {k.label: round(v, 3) for k, v in ks.items()})

judge = {
    "q1": Classification("q1", "d", "judge-a", codes("C1"), codes("P6")),
    "q2": Classification("q2", "d", "judge-a", codes("C3"), codes("P4", "P3")),
    "q3": Classification("q3", "d", "judge-a", codes("C6"), codes()),
    "q4": Classification("q4", "d", "judge-a", codes(), codes("P3")),
}
report = evaluate(judge, gold, "judge-a")
print()
print(metrics_markdown([report]))
print("capabilities:", report.capabilities.counts.to_json(), report.capabilities.kappa_band)
print("propensities:", report.propensities.counts.to_json(), report.propensities.kappa_band)
