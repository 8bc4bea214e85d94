"""
Stability exponents and the threshold ledger
============================================

The exponent sequence a_j follows from the dimension and the Diophantine
exponent alone. The ledger then checks every smallness condition for a given
perturbation size and reports which one binds, together with the threshold
eps0 below which all of them hold.
"""

import math

from nekhoroshev_lab import condition_ledger, exponent_plan

for n, tau in ((2, 2), (3, 2), (2, 3)):
    p = exponent_plan(n, tau)
    print(f"n={n} tau={tau}: a_j = {', '.join(map(str, p.a_seq))}; a = b = {p.a}; "
          f"generic exponent (2n)^(-3n)/3 = {p.theorem_value}")

led = condition_ledger(2, 2, 0.5, 1e-3)
print(led.table())
print(f"binding condition {led.binding.label()}; eps0 = 10^{led.log_eps0 / math.log(10):.4f}")

# far below the threshold every row passes
led = condition_ledger(2, 2, 0.5, 0.0, log_eps=led.log_eps0 - 1.0)
print("just below eps0 all conditions hold:", led.passed)
