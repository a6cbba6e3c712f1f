"""
Lifting from a pile
===================

A cup that grabs the bottom box of a stack also carries whatever rests on it.
The support graph finds who rests on whom; the lift check then compares the
carried weight with the cup's force limit.
"""

from suctiongrasp.cup import preset
from suctiongrasp.fixtures import BoxSpec, make_stack_scene, vertical_candidate
from suctiongrasp.wrench import build_support_graph, evaluate_wrench

# a 1.5 kg box with a 1.0 kg box on top
scene = make_stack_scene([BoxSpec((0.10, 0.10, 0.05), 1.5),
                          BoxSpec((0.06, 0.06, 0.04), 1.0)])
graph = build_support_graph(scene)
print("support edges (below, above):", graph.edges)
print("carried mass per object (kg):", graph.load)

grasp = vertical_candidate([0.0, 0.0, 0.05], instance_id=1)
for name in ("cup_15mm", "cup_25mm"):
    cup = preset(name)
    w = evaluate_wrench(scene, graph, cup, grasp)
    verdict = "lifts" if w.passed else f"fails ({w.failure_reason})"
    print(f"{name}: needs {w.payload_force:.2f} N of {cup.force_limit:.0f} N -> {verdict}")

# a plank across two posts splits its weight evenly
bridge = make_stack_scene([BoxSpec((0.05, 0.05, 0.05), 1.0, xy=(-0.06, 0)),
                           BoxSpec((0.05, 0.05, 0.05), 1.0, xy=(0.06, 0)),
                           BoxSpec((0.20, 0.05, 0.01), 0.6)])
print("\nbridge loads (kg):", build_support_graph(bridge).load)
