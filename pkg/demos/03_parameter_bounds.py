"""
Choosing admissible parameters
==============================

The step size, proximal weights and dual weight must satisfy four
inequalities at every time index.  This script shows the report for
the suggested parameters and for a deliberately greedy step size, and
checks the two matrix facts the inequalities are meant to guarantee.
"""

import numpy as np

from tvgnwe import build_preconditioner, check_bounds, suggest_params
from tvgnwe.scenarios import random_game

game = random_game(11)
print(f"random instance: N={game.N}, n={game.n}, M={game.M}\n")

p = suggest_params(game, 0, margin=0.1)
rep = check_bounds(game, 0, p)
print("suggested parameters")
print(rep.format())

# Tripling the step size breaks the step-size row and the upper beta bound.
greedy = p.with_gamma(3 * p.gamma)
print("\nthree times the step size")
print(check_bounds(game, 0, greedy).format())

# When the report passes, the symmetric part U of the preconditioner is
# positive definite and gamma ||K|| < 1.
pc = build_preconditioner(game, 0, p)
lam_min = np.linalg.eigvalsh(pc.U)[0]
print(f"\nlambda_min(U) = {lam_min:.4f},  gamma ||K|| = {p.gamma * pc.norm_K:.4f}")
