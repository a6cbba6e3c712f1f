"""
Seal checks on the procedural test board
========================================

Each pad is a small slab with one surface feature under the cup: a tilt, a
groove, a hole, roughness or a step. The cup is lowered vertically onto the
pad center and evaluated twice, once with the full 960-ray model and once with
the 8 outer-rim rays only.
"""

from suctiongrasp.cup import CupModel
from suctiongrasp.evaluation import model_comparison_report
from suctiongrasp.fixtures import make_board

cup = CupModel()
print(f"cup radius {cup.radius * 1000:.0f} mm, rest height {cup.rest_height * 1000:.0f} mm, "
      f"spread limit {cup.spread_limit * 1000:.1f} mm")

# every case carries the verdict its geometry implies
cases = make_board(cup)
report = model_comparison_report(cases, cup)

print(f"\n{'pad':<20}{'expect':>8}{'960':>6}{'8':>6}{'spread mm':>12}")
for row in report.rows:
    spread = row["full_spread"] * 1000
    print(f"{row['case']:<20}{row['expected_960']!s:>8}{row['full_960']!s:>6}"
          f"{row['perimeter_8']!s:>6}{spread:>12.3f}")

# the rim-only model misses anything the rim does not touch
print("\nwhere the two models disagree:")
for d in report.disagreements:
    print(f"  {d['case']:<20} {d['kind']}")
