"""Walk through the capability/propensity taxonomy and the systemic-risk map.

Run: python demos/01_taxonomy_and_risks.py
"""

from regcov.taxonomy import SystemicRisk, all_categories, default_risk_map

print("Taxonomy")
for d in all_categories():
    print(f"  {d.code!s:>4}  {d.name}")

rm = default_risk_map()
print("\nSystemic risks and their components")
for risk in SystemicRisk:
    print(f"  {risk.display_name:<22} {' '.join(str(c) for c in rm.ordered[risk])}")

covered = frozenset().union(*rm.values())
orphans = [str(d.code) for d in all_categories() if d.code not in covered]
print(f"\n{len(covered)} codes feed at least one risk; not mapped: {', '.join(orphans)}")
