"""
Periodic approximation of a frequency vector
============================================

Every frequency vector is close to a periodic one, and the period controls
the size of the small divisors along the approximation.
"""

import math

import numpy as np

from nekhoroshev_lab import PeriodicVector, dirichlet_approx, resonance_module, smallest_divisor

# an irrational direction in the plane
v = np.array([1.0, math.sqrt(2)])

# larger Q buys a closer approximation at the cost of a longer period
for Q in (2, 10, 100, 1000):
    c = dirichlet_approx(v, Q)
    print(f"Q={Q:5d}  omega={np.round(c.result.to_array(), 6)}  T={float(c.period):9.4f}  "
          f"|v-omega|={float(c.error):.2e}  certified={c.check()}")

# the certificate serialises losslessly
c = dirichlet_approx(v, 100)
print(c.to_json(indent=1))

# a periodic omega never has a divisor below 1/T, whatever the order
w = PeriodicVector.from_rationals([1, "3/5"])
for K in (2, 6, 20):
    print(f"|k|_1 <= {K:2d}: smallest |k.omega| = {smallest_divisor(w, K)}, 1/T = {1 / w.real_period}")

# the resonance module of two periodic vectors in three dimensions
mod = resonance_module([PeriodicVector.from_rationals([1, 1, 0]),
                        PeriodicVector.from_rationals([1, 0, "1/3"])])
print("resonance module basis:", mod.generators, "rank", mod.rank)
