"""Recompute tiers and systemic-risk coverage from the bundled reference
coverage tables, and list where those tables disagree with themselves.

Run: python demos/05_reference_counts.py
"""

from regcov.analysis import analyze_fixture, audit_fixture, load_fixture, risk_markdown

fx = load_fixture()
report = analyze_fixture(fx)

print(f"corpus: {fx.corpus_size:,} questions over {len(fx.matrix.benchmarks)} benchmarks\n")
for name, members in report.tiers.items():
    print(f"{name:<9} {' '.join(members)}")

print()
print(risk_markdown(report.risk))
hm = report.risk[0]
print(f"{hm.risk.display_name}: exact share {100 * hm.coverage:.4f}%")

print("\ngrand totals from category totals:", report.grand_totals)
print("grand totals from per-benchmark cells:", report.metadata["cell_grand_totals"])
print("\ninconsistencies inside the bundled reference counts:")
for issue in audit_fixture(fx):
    print("  ", issue)
