"""
Where myopic best responses go wrong
====================================

Two small games in which every agent simply re-optimises against the
previous profile.  In the first the profile never settles; in the second
each static network has an equilibrium but the alternation between them
has none, so nothing can settle.
"""

import numpy as np

from tvgnwe import certify_pn_enwe
from tvgnwe.scenarios import build_example1, build_example2, resolve_scenario
from tvgnwe.solver import best_response_step, initial_state, run_best_response

# Two scalar agents must satisfy x1 + x2 = 0 and have no cost of their own,
# so each one answers with minus the other's last move.
game, br = build_example1()
s = initial_state(game, [1.0, 1.0])
print("equality-coupled pair, starting from (1, 1):")
for _ in range(6):
    s = best_response_step(s, br)
    print(f"  k={s.k}  x={s.x}")
print("the profile flips sign forever; the origin is the only resting point\n")

# Quadratic costs pull agent i towards i, the network pulls them together.
for key, expect in (("A1", (1.25, 1.75)), ("A2", (4 / 3, 11 / 6))):
    sc = resolve_scenario(f"example2:{key}")
    tr = run_best_response(sc.game, sc.br, sc.x0, max_iters=200)
    print(f"static network {key}: limit {tr.final.x}, expected {np.round(expect, 6)}")

# Alternate the two networks.  The limits above differ, so the iterate keeps
# being pulled back and forth.
sc = resolve_scenario("example2:alt")
tr = run_best_response(sc.game, sc.br, sc.x0, max_iters=1001, keep_iterates=True)
X = np.array([x for x, _ in tr.iterates])
steps = np.linalg.norm(np.diff(X, axis=0), axis=1)
print(f"\nalternating networks: smallest move over k in [100, 1000] is {steps[100:].min():.4f}")
print("the last four iterates:")
print(X[-4:])

# Neither static limit survives under the alternation.
alt = build_example2("alt")
for x in (np.array([1.25, 1.75]), np.array([4 / 3, 11 / 6])):
    cert = certify_pn_enwe(x, np.zeros(0), alt, range(100, 110))
    print(f"candidate {np.round(x, 4)}: certified={cert.certified}, worst residual {cert.worst:.3f}")
