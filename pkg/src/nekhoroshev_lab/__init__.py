"""Numerical tools around exponential stability of near-integrable Hamiltonians.

Submodules
----------
diophantine
    Exact periodic vectors, simultaneous Dirichlet approximation, resonance lattices.
trig_hamiltonian
    Trigonometric-polynomial Hamiltonians, Poisson brackets, averaging and norms.
normal_form
    Iterated resonant normal forms by Lie series.
steepness
    SDM checks on rational subspaces and a prevalence estimator.
dynamics
    Symplectic integration, escape times and resonance traces.
exponents
    Stability exponents and the smallness-condition ledger.
cli
    Command-line runner writing self-describing run directories.
"""

from .constants import Constants
from .diophantine import (ApproximationCertificate, PeriodicVector, ResonanceModule,
                          dirichlet_approx, period_of, project_onto, resonance_module,
                          smallest_divisor)
from .dynamics import (DriftTrace, ResonanceTrace, ScalingTable, integrate, resonance_trace,
                       stability_time)
from .exponents import ConditionLedger, ExponentPlan, condition_ledger, exponent_plan
from .normal_form import (NormalFormResult, StepRejected, averaging_step, nearly_periodic_domain,
                          normal_form)
from .steepness import SdmReport, enumerate_subspaces, prevalence_mc, sdm_check, steep_witness
from .trig_hamiltonian import (AnalyticDomain, TrigPolyHamiltonian, average_along,
                               homological_solve, majorant_norm, poisson_bracket,
                               weighted_vf_norm)

__version__ = "0.1.0"

__all__ = [
    "Constants", "ApproximationCertificate", "PeriodicVector", "ResonanceModule",
    "dirichlet_approx", "period_of", "project_onto", "resonance_module", "smallest_divisor",
    "DriftTrace", "ResonanceTrace", "ScalingTable", "integrate", "resonance_trace",
    "stability_time", "ConditionLedger", "ExponentPlan", "condition_ledger", "exponent_plan",
    "NormalFormResult", "StepRejected", "averaging_step", "nearly_periodic_domain", "normal_form",
    "SdmReport", "enumerate_subspaces", "prevalence_mc", "sdm_check", "steep_witness",
    "AnalyticDomain", "TrigPolyHamiltonian", "average_along", "homological_solve",
    "majorant_norm", "poisson_bracket", "weighted_vf_norm", "__version__",
]
