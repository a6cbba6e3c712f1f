"""
How much tilt can the cup absorb?
=================================

On a plane tilted by ``theta`` the rim touches down unevenly: the hit
distances across the cup spread by ``2 R tan(theta)``. The seal holds while
that spread stays within 10% of the rest height.
"""

import numpy as np

from suctiongrasp.cup import preset
from suctiongrasp.fixtures import PadSpec, make_pad, vertical_candidate
from suctiongrasp.geometry import SceneIndex, SceneModel, SceneObject
from suctiongrasp.seal import evaluate_seal


def seal_on_tilt(cup, deg):
    spec = PadSpec.tilt(deg)
    scene = SceneModel((SceneObject(1, make_pad(spec)),), ground_plane=False)
    return evaluate_seal(SceneIndex(scene), cup, vertical_candidate([0, 0, spec.top]))


for name in ("cup_15mm", "cup_25mm"):
    cup = preset(name)
    limit = np.degrees(np.arctan(cup.spread_limit / (2 * cup.radius)))
    print(f"{name}: closed-form limit {limit:.2f} deg")
    for deg in (1.0, 2.0, 3.0, 3.5, 4.0, 5.0):
        r = seal_on_tilt(cup, deg)
        print(f"  {deg:4.1f} deg  spread {r.spread * 1000:6.3f} mm  "
              f"{'seal' if r.passed else 'leak'}")

# bisection on the evaluator itself recovers the same angle
cup = preset("cup_15mm")
lo, hi = 0.5, 10.0
while hi - lo > 1e-3:
    mid = 0.5 * (lo + hi)
    lo, hi = (mid, hi) if seal_on_tilt(cup, mid).passed else (lo, mid)
print(f"\nbisected boundary for cup_15mm: {0.5 * (lo + hi):.3f} deg")
