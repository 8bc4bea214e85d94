"""
Fast drift along a saddle resonance
===================================

For ``h = (I1^2 - I2^2)/2 + eps sin 2pi(theta1 + theta2)`` the combination
theta1 + theta2 stays frozen, so both actions move linearly at speed
``2 pi eps |cos 2pi phi0|``: the escape time scales like 1/eps. A convex
integrable part confines the same kind of perturbation.
"""

from pathlib import Path

import numpy as np

from nekhoroshev_lab import TrigPolyHamiltonian as T, integrate, resonance_trace, stability_time
from nekhoroshev_lab.dynamics import fast_drift_time

here = Path(__file__).parent
saddle = T.load(here / "saddle_pert.json")
convex = T.load(here / "convex_pert.json")

phi0, delta = 0.05, 0.1
init = (np.array([phi0, 0.0]), np.zeros(2))
tab = stability_time(saddle, init, [1e-2, 1e-3, 1e-4], delta)
for e, t in zip(tab.eps, tab.t_star):
    print(f"eps {e:.0e}: escape at t* = {t:10.3f}, predicted {fast_drift_time(e, delta, phi0):10.3f}")
print(f"log-log slope {tab.slope:.4f}")

# same perturbation size, convex unperturbed part: no escape before the horizon
eps = 1e-3
trace = integrate(convex.instantiate(eps), init, 0.01, 2e3, stride=100, delta=delta)
print(f"convex: status {trace.status}, max drift {trace.max_drift:.2e} after t = {trace.horizon:g}")

# which periodic frequencies does the saddle orbit shadow on its way out
trace = integrate(saddle.instantiate(1e-2), (np.zeros(2), np.array([0.05, 0.05])), 0.01, 3.0,
                  stride=10)
rt = resonance_trace(trace, T.monomial((2, 0), 0.5) + T.monomial((0, 2), -0.5), 50)
print("resonant directions visited:", rt.distinct_directions())
