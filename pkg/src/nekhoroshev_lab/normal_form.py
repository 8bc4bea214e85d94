"""Averaging along periodic frequencies and the iterated resonant normal form.

One averaging step removes the non-resonant modes of the perturbation with
respect to a periodic frequency omega by the Lie transform generated by the
solution chi of the homological equation. The exact transform
``exp(L_chi) H`` (``L_chi F = {F, chi}``) is an infinite series on this class;
it is truncated at bracket depth N and the neglected tail is bounded by the
usual geometric Cauchy estimate.

A stage repeats the step m times on shrinking domains; stage j averages the
resonant part left by stage j-1 along the next frequency, so that the final
resonant part commutes with every ``l_i = omega_i . I``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .constants import Constants
from .diophantine import PeriodicVector, exact_rank
from .trig_hamiltonian import (
    AnalyticDomain,
    TrigPolyHamiltonian,
    action_norm,
    angular_norm,
    average_along,
    homological_solve,
    linear_hamiltonian,
    majorant_norm,
    poisson_bracket,
)

__all__ = [
    "StepRejected",
    "DomainNestingError",
    "AveragingStep",
    "NormalFormResult",
    "averaging_step",
    "normal_form",
    "lie_transform",
    "nearly_periodic_domain",
]


class StepRejected(ArithmeticError):
    """The Lie-series tail bound diverges (geometric ratio >= 1)."""

    def __init__(self, ratio: float, stage: int | None = None, step: int | None = None):
        self.ratio = ratio
        self.stage = stage
        self.step = step
        where = "" if stage is None else f" at stage {stage}, step {step}"
        super().__init__(f"averaging step rejected{where}: tail ratio {ratio:.6g} >= 1")


class DomainNestingError(ValueError):
    """Consecutive nearly-periodic domains are not nested."""


def _prune(F: TrigPolyHamiltonian, tol: float, rel: float) -> TrigPolyHamiltonian:
    cut = max(tol, rel * F.max_abs_coeff())
    return F.prune(cut) if cut > 0 else F


def lie_transform(F: TrigPolyHamiltonian, chi: TrigPolyHamiltonian, depth: int,
                  prune_tol: float = 0.0, prune_rel: float = 0.0, start: int = 1
                  ) -> tuple[TrigPolyHamiltonian, TrigPolyHamiltonian]:
    """``sum_{j=0}^{depth} L_chi^j F / j!`` and its last nonzero term.

    With ``start > 1`` the input is taken to be ``L^(start-1) G / (start-1)!``
    and the factorials continue from there, which resumes a series of G.
    Each generated term drops coefficients with modulus at most
    ``max(prune_tol, prune_rel * largest coefficient of that term)``.
    """
    total = F
    last = F
    for j in range(start, start + depth):
        term = _prune(poisson_bracket(last, chi) * (1.0 / j), prune_tol, prune_rel)
        if term.is_zero():
            break
        total = total + term
        last = term
    return total, last


def _lie_ratio(chi: TrigPolyHamiltonian, dom: AnalyticDomain, r_prime: float, s_prime: float) -> float:
    # Cauchy estimate for one application of L_chi when the domain loses (r', s')
    return math.e * (action_norm(chi, dom) / s_prime + angular_norm(chi, dom) / r_prime)


@dataclass
class AveragingStep:
    """Output of :func:`averaging_step`.

    Attributes
    ----------
    h, g_plus, f_plus, chi : TrigPolyHamiltonian
        Integrable part, new resonant part ``g + [f]``, new remainder and the
        generating function.
    tail_bound : float
        Majorant bound on the part of the exact transform beyond depth N.
    tail_ratio : float
        The geometric ratio used for the tail bound.
    input_norm, output_norm : float
        ``|d_theta f|`` on the input domain and ``|d_theta f_plus|`` on the
        shrunk domain.
    contraction : float
        ``output_norm / input_norm`` (0 when the input is zero).
    predicted : float
        ``T (r / s' + eps_tilde / r')`` with constants applied; the factor the
        step estimate bounds the contraction by.
    """

    h: TrigPolyHamiltonian
    g_plus: TrigPolyHamiltonian
    f_plus: TrigPolyHamiltonian
    chi: TrigPolyHamiltonian
    tail_bound: float
    tail_ratio: float
    input_norm: float
    output_norm: float
    contraction: float
    predicted: float
    domain_out: AnalyticDomain


def averaging_step(h: TrigPolyHamiltonian, g: TrigPolyHamiltonian, f: TrigPolyHamiltonian,
                   omega: PeriodicVector, dom: AnalyticDomain, N: int = 4, *,
                   r_prime: float | None = None, s_prime: float | None = None,
                   constants: Constants | None = None, prune_tol: float = 0.0,
                   prune_rel: float = 1e-15, check_tail: bool = True) -> AveragingStep:
    """One averaging step of ``h + g + f`` along the periodic frequency omega.

    Parameters
    ----------
    h, g, f : TrigPolyHamiltonian
        Integrable part, resonant part (must commute with ``omega . I``) and
        perturbation.
    omega : PeriodicVector
    dom : AnalyticDomain
        Domain on which the input is measured.
    N : int
        Bracket depth of the Lie series, at least 2.
    r_prime, s_prime : float, optional
        Domain losses of the step; default ``dom.r / 3`` and ``dom.s / 3``.
    prune_tol, prune_rel : float
        Absolute and relative (to the largest coefficient) cutoffs below
        which generated coefficients are dropped. The relative default sits
        at double-precision roundoff.

    Returns
    -------
    AveragingStep

    Raises
    ------
    StepRejected
        If the Lie-series tail ratio is >= 1 and `check_tail` is set.
    """
    if N < 2:
        raise ValueError("truncation depth N must be >= 2")
    if not h.is_integrable():
        raise ValueError("h must be angle free")
    bad = [k for k in g.modes() if not omega.is_resonant(k)]
    if bad:
        raise ValueError(f"g does not commute with l_omega: mode {bad[0]} has k.omega != 0")
    constants = constants or Constants()
    r_prime = dom.r / 3 if r_prime is None else r_prime
    s_prime = dom.s / 3 if s_prime is None else s_prime
    shift, local = _localize(dom)
    back = tuple(-x for x in shift)
    st = _step_local(h.translate(shift), g.translate(shift), f.translate(shift), omega, local,
                     N, r_prime, s_prime, constants, prune_tol, prune_rel, check_tail)
    st.h = h
    st.g_plus = st.g_plus.translate(back)
    st.f_plus = st.f_plus.translate(back)
    st.chi = st.chi.translate(back)
    st.domain_out = dom.shrink(r_prime, s_prime)
    return st


def _localize(dom: AnalyticDomain):
    """Shift to the domain center and the same domain centered at the origin."""
    if dom.center is None:
        return (0.0,) * 0, dom
    n = len(dom.center)
    return dom.center, replace(dom, center=(0.0,) * n)


def _step_local(h, g, f, omega, dom, N, r_prime, s_prime, constants, prune_tol, prune_rel,
                check_tail) -> AveragingStep:
    # actions are measured from the domain center, so h - l has no constant
    # frequency part and {h - l, chi} is computed without cancellation
    dom_out = dom.shrink(r_prime, s_prime)
    avg = average_along(f, omega)
    chi = homological_solve(f, omega)
    in_norm = angular_norm(f, dom)
    T = float(omega.real_period)
    eps_tilde = max(action_norm(f, dom), (dom.s / dom.r) * in_norm)
    predicted = constants.step * T * (dom.r / s_prime + eps_tilde / r_prime)

    if chi.is_zero():
        zero = TrigPolyHamiltonian.zero(f.n)
        return AveragingStep(h, g + avg, zero, chi, 0.0, 0.0, in_norm, 0.0, 0.0,
                             predicted, dom_out)

    ratio = _lie_ratio(chi, dom, r_prime, s_prime)
    if check_tail and ratio >= 1:
        raise StepRejected(ratio)
    l = linear_hamiltonian(omega)
    # L_chi H = {h - l, chi} + {g + f, chi} - (f - [f]), using {l, chi} = -(f - [f])
    first = _prune(poisson_bracket(h - l, chi) + poisson_bracket(g + f, chi),
                   prune_tol, prune_rel)
    LH = first - (f - avg)
    # exp(L_chi) H - h - g - [f] = first + sum_{j >= 2} L_chi^j H / j!
    series, last = lie_transform(LH, chi, N - 1, prune_tol, prune_rel, start=2)
    f_plus = _prune(first + (series - LH), prune_tol, prune_rel)
    # series terms decay at least like ratio^j, so the tail is a geometric sum
    tail = majorant_norm(last, dom) * ratio / (1 - ratio) if ratio < 1 else math.inf
    out_norm = angular_norm(f_plus, dom_out)
    contraction = out_norm / in_norm if in_norm else 0.0
    return AveragingStep(h, g + avg, f_plus, chi, tail, ratio, in_norm, out_norm,
                         contraction, predicted, dom_out)


def nearly_periodic_domain(h: TrigPolyHamiltonian, omega: PeriodicVector, r: float, s: float,
                           R: float = 1.0, window: float = 1.0, guess=None) -> AnalyticDomain:
    """Domain around the action point where ``grad h = omega``.

    The center is found by Newton's method on ``grad h(I) = omega``; the
    action radius is ``window * r`` divided by the largest Hessian singular
    value at the center, so that ``|grad h - omega| < window * r`` holds to
    first order on the domain.
    """
    target = omega.to_array()
    grads = h.gradient_action()
    hess = [[gi.d_action(j) for j in range(h.n)] for gi in grads]
    zeros = np.zeros(h.n)
    I = np.array(target if guess is None else guess, dtype=float)
    for _ in range(100):
        G = np.array([gi(zeros, I) for gi in grads]) - target
        J = np.array([[hij(zeros, I) for hij in row] for row in hess])
        step = np.linalg.solve(J, G)
        I = I - step
        if np.max(np.abs(step)) < 1e-15 * max(1.0, np.max(np.abs(I))):
            break
    J = np.array([[hij(zeros, I) for hij in row] for row in hess])
    lam = np.linalg.svd(J, compute_uv=False)[0]
    return AnalyticDomain(window * r / lam, s, R, tuple(I), omega, window)


@dataclass
class NormalFormResult:
    """Transformed Hamiltonian ``h + g + f`` with per-step diagnostics.

    Attributes
    ----------
    h, g, f : TrigPolyHamiltonian
        Integrable part, resonant part (modes in the common resonance module)
        and remainder.
    generator_log : list of list of TrigPolyHamiltonian
        Generating functions per stage, in application order.
    rows : list of dict
        One row per step: stage, step, remainder_norm, contraction, predicted,
        tail_bound.
    stage_input_norms, stage_output_norms : list of float
        ``|d_theta|`` of the perturbation entering and leaving each stage
        (stage-local iteration, excluding the carried remainder).
    carried_norms : list of float
        ``|d_theta|`` of the remainder from earlier stages after transport
        through each stage.
    steps : int
    """

    h: TrigPolyHamiltonian
    g: TrigPolyHamiltonian
    f: TrigPolyHamiltonian
    omegas: tuple[PeriodicVector, ...]
    generator_log: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    stage_input_norms: list = field(default_factory=list)
    stage_output_norms: list = field(default_factory=list)
    carried_norms: list = field(default_factory=list)
    tail_bounds: list = field(default_factory=list)
    steps: int = 0

    @property
    def transformed(self) -> TrigPolyHamiltonian:
        return self.h + self.g + self.f

    @property
    def remainder_norms(self) -> list[float]:
        return [row["remainder_norm"] for row in self.rows]

    def stage_rows(self, stage: int) -> list[dict]:
        return [row for row in self.rows if row["stage"] == stage]

    def contractions(self, stage: int | None = None) -> list[float]:
        rows = self.rows if stage is None else self.stage_rows(stage)
        return [row["contraction"] for row in rows if row["step"] > 0]

    def g_modes_resonant(self) -> bool:
        """Exact check that every mode of g is resonant for every omega."""
        return all(w.is_resonant(k) for k in self.g.modes() for w in self.omegas)

    def write_csv(self, path) -> None:
        cols = ["stage", "step", "remainder_norm", "contraction", "predicted", "tail_bound"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in cols])


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _check_nesting(doms: Sequence[AnalyticDomain], omegas: Sequence[PeriodicVector], c: float):
    for j in range(1, len(doms)):
        prev, cur = doms[j - 1], doms[j]
        jump = float(max(abs(a - b) for a, b in zip(omegas[j].value, omegas[j - 1].value)))
        if c * cur.r + jump > c * 2 * prev.r / 3 * (1 + 1e-12):
            raise DomainNestingError(
                f"stage {j + 1}: window {c}*r={c * cur.r:.6g} plus frequency jump {jump:.6g} "
                f"exceeds 2/3 of the previous window {c * 2 * prev.r / 3:.6g}")
        if cur.s > 2 * prev.s / 3 * (1 + 1e-12):
            raise DomainNestingError(
                f"stage {j + 1}: width {cur.s:.6g} exceeds 2/3 of previous width {prev.s:.6g}")


def normal_form(H: TrigPolyHamiltonian, omegas: Sequence[PeriodicVector],
                doms: Sequence[AnalyticDomain], m: int, N: int = 4, *,
                constants: Constants | None = None, prune_tol: float = 0.0,
                prune_rel: float = 1e-15, check_nesting: bool = True) -> NormalFormResult:
    """Iterated resonant normal form ``H o Psi = h + g + f``.

    Parameters
    ----------
    H : TrigPolyHamiltonian
        Grade-0 terms form h (must be angle free); higher grades are the
        perturbation.
    omegas : list of PeriodicVector
        Linearly independent periodic frequencies, one per stage.
    doms : list of AnalyticDomain
        One domain per stage; each stage takes m steps, losing ``r/(3m)`` and
        ``s/(3m)`` per step.
    m : int
        Steps per stage. ``m = 0`` returns the input untouched.
    N : int
        Lie-series depth.
    prune_tol, prune_rel : float
        Coefficient cutoffs, see :func:`averaging_step`.

    Raises
    ------
    DomainNestingError
        If the stage windows are not nested (frequency-space triangle check).
    StepRejected
        With the stage and step index where the Lie series tail diverged.
    """
    constants = constants or Constants()
    omegas = tuple(omegas)
    if len(omegas) != len(doms):
        raise ValueError("need one domain per frequency")
    if omegas and exact_rank([w.numerator for w in omegas]) < len(omegas):
        raise ValueError("frequencies must be linearly independent")
    if check_nesting:
        _check_nesting(doms, omegas, constants.window)
    h = H.grade_part(0)
    if not h.is_integrable():
        raise ValueError("grade-0 part of H must be angle free")
    pert = H - h
    zero = TrigPolyHamiltonian.zero(H.n)
    result = NormalFormResult(h=h, g=zero, f=pert, omegas=omegas)
    if m == 0:
        return result

    # everything is carried in action coordinates centred on the current
    # stage's domain; `origin` is that center in the original coordinates
    n = H.n
    origin = (0.0,) * n
    hl = h
    g_prev, carried = zero, zero
    f_stage = pert
    for j, (omega, dom) in enumerate(zip(omegas, doms), start=1):
        center = dom.center if dom.center is not None else (0.0,) * n
        shift = tuple(c - o for c, o in zip(center, origin))
        hl, g_prev, f_stage, carried = (F.translate(shift) for F in (hl, g_prev, f_stage, carried))
        origin = center
        local = replace(dom, center=(0.0,) * n) if dom.center is not None else dom
        if j > 1:
            # stage j averages the previous resonant part; the old remainder
            # is transported by the same transforms
            carried = carried + f_stage
            f_stage = g_prev
        g = zero
        r_p, s_p = dom.r / (3 * m), dom.s / (3 * m)
        cur = local
        chis = []
        result.stage_input_norms.append(angular_norm(f_stage, local))
        result.rows.append(dict(stage=j, step=0, remainder_norm=result.stage_input_norms[-1],
                                contraction=math.nan, predicted=math.nan, tail_bound=0.0))
        for i in range(1, m + 1):
            try:
                st = _step_local(hl, g, f_stage, omega, cur, N, r_p, s_p, constants,
                                 prune_tol, prune_rel, True)
            except StepRejected as exc:
                raise StepRejected(exc.ratio, stage=j, step=i) from None
            chis.append(st.chi.translate(tuple(-x for x in origin)))
            if not carried.is_zero() and not st.chi.is_zero():
                carried, _ = lie_transform(carried, st.chi, N, prune_tol, prune_rel)
            g, f_stage, cur = st.g_plus, st.f_plus, st.domain_out
            result.tail_bounds.append(st.tail_bound)
            result.rows.append(dict(stage=j, step=i, remainder_norm=st.output_norm,
                                    contraction=st.contraction, predicted=st.predicted,
                                    tail_bound=st.tail_bound))
            result.steps += 1
            if f_stage.is_zero():
                break
        result.generator_log.append(chis)
        result.stage_output_norms.append(angular_norm(f_stage, cur))
        result.carried_norms.append(angular_norm(carried, cur))
        g_prev = g
    back = tuple(-x for x in origin)
    result.g = g_prev.translate(back)
    result.f = (f_stage + carried).translate(back)
    return result
