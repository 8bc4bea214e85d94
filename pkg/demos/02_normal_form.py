"""
Resonant normal form near a periodic frequency
==============================================

Near the action where the frequency is the periodic vector (1, 1), the
non-resonant harmonic sin 2pi(theta1 + theta2) can be pushed into a remainder
that shrinks geometrically with the number of averaging steps, while the
resonant harmonic cos 2pi(theta1 - theta2) survives in the normal form.
"""

import math

from nekhoroshev_lab import (PeriodicVector, TrigPolyHamiltonian as T, average_along,
                             homological_solve, nearly_periodic_domain, normal_form,
                             poisson_bracket)
from nekhoroshev_lab.trig_hamiltonian import linear_hamiltonian

eps = 1e-12
h = T.quadratic([1, 1])
f = T.sin_mode((1, 1), eps, grade=1) + T.cos_mode((1, -1), eps, grade=1)
w = PeriodicVector.from_rationals([1, 1])

# one homological equation by hand: {chi, l_omega} = f - [f]
chi = homological_solve(f, w)
residual = poisson_bracket(chi, linear_hamiltonian(w)) - (f - average_along(f, w))
print("average keeps modes", sorted(average_along(f, w).modes()))
print(f"homological residual {residual.max_abs_coeff():.1e}")

# the iterated construction on a complex domain centred where grad h = omega
dom = nearly_periodic_domain(h, w, 0.003, 0.3)
res = normal_form(h + f, [w], [dom], m=6)
print(f"{'step':>4} {'remainder':>12} {'contraction':>12} {'predicted':>10}")
for row in res.rows:
    print(f"{row['step']:4d} {row['remainder_norm']:12.3e} "
          f"{row['contraction'] if row['step'] else math.nan:12.3e} "
          f"{row['predicted'] if row['step'] else math.nan:10.3f}")
print("resonant part has only resonant modes:", res.g_modes_resonant())
