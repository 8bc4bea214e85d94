"""Stability exponents and a ledger of the smallness conditions behind them.

With ``a_j = (2 tau (n+1))^(j-n-1)`` and ``a = b = a_1 / 3`` the parameters
``m = eps^-a``, ``r_0 = eps^b`` and ``r_j = T_j^-1 eps^(a_j)`` satisfy a list
of exponent inequalities (checked exactly here) and a list of conditions
of the form ``eps^e < K``, each giving a threshold on eps. The ledger reports
every row, the binding one and the resulting threshold eps_0. It is a
diagnostic of the bookkeeping, not a certified stability bound: all implicit
constants are taken from a :class:`~nekhoroshev_lab.constants.Constants`
table (default 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .constants import Constants

__all__ = [
    "ExponentPlan",
    "LedgerRow",
    "ConditionLedger",
    "exponent_plan",
    "exponent_conditions",
    "condition_ledger",
]


@dataclass(frozen=True)
class ExponentPlan:
    """Exact exponents for dimension n and Diophantine exponent tau.

    Attributes
    ----------
    a_seq : tuple of Fraction
        ``a_1 .. a_n``.
    a, b : Fraction
        Stability exponents (time ``exp(eps^-a)``, radius ``eps^b``).
    theorem_value : Fraction
        ``(2n)^(-3n) / 3``, the headline exponent for generic h, reported
        side by side without asserting a link.
    """

    n: int
    tau: Fraction
    a_seq: tuple
    a: Fraction
    b: Fraction
    theorem_value: Fraction

    def m(self, eps: float, C: float = 1.0) -> int:
        """Number of averaging steps ``ceil(C eps^-a)``."""
        return math.ceil(C * eps ** (-float(self.a)))

    def r0(self, eps: float) -> float:
        return eps ** float(self.b)

    def r(self, j: int, eps: float, T: float = 1.0, C: float = 1.0) -> float:
        """``r_j = C T_j^-1 eps^(a_j)`` (j from 1)."""
        return C * eps ** float(self.a_seq[j - 1]) / T

    def to_dict(self) -> dict:
        return {
            "n": self.n, "tau": str(self.tau),
            "a_j": [str(x) for x in self.a_seq], "a": str(self.a), "b": str(self.b),
            "a_j_decimal": [float(x) for x in self.a_seq],
            "a_decimal": float(self.a), "b_decimal": float(self.b),
            "theorem_value": str(self.theorem_value),
            "theorem_value_decimal": float(self.theorem_value),
        }


def exponent_plan(n: int, tau) -> ExponentPlan:
    """Exponents for n degrees of freedom; tau is taken exactly (int, Fraction or str)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    tau = Fraction(tau) if not isinstance(tau, float) else Fraction(tau).limit_denominator(10**12)
    if tau < 2:
        raise ValueError(f"tau must be >= 2, got {tau}")
    base = 2 * tau * (n + 1)
    a_seq = tuple(base ** (j - n - 1) for j in range(1, n + 1))
    a = b = a_seq[0] / 3
    theorem = Fraction(1, 3 * (2 * n) ** (3 * n))
    return ExponentPlan(n, tau, a_seq, a, b, theorem)


@dataclass
class LedgerRow:
    """One condition.

    For ``kind == "exponent"`` the row is ``value > 0`` with an exact value.
    For ``kind == "threshold"`` it reads ``C eps^e < K``, i.e.
    ``eps < (K / C)^(1/e)``.
    """

    name: str
    j: int | None
    kind: str
    text: str
    passed: bool
    value: Fraction | None = None
    exponent: Fraction | None = None
    K: float | None = None
    constant: float = 1.0
    threshold: float | None = None
    log_threshold: float | None = None
    lhs: float | None = None
    rhs: float | None = None

    def label(self) -> str:
        return self.name if self.j is None else f"{self.name}[j={self.j}]"

    def to_dict(self) -> dict:
        d = {"row": self.label(), "kind": self.kind, "condition": self.text,
             "passed": self.passed}
        if self.kind == "exponent":
            d["value"] = str(self.value)
            d["value_decimal"] = float(self.value)
        else:
            d.update(exponent=str(self.exponent), K=self.K, constant=self.constant,
                     threshold=self.threshold, log10_threshold=self.log_threshold / math.log(10),
                     lhs=self.lhs, rhs=self.rhs)
        return d


def exponent_conditions(plan: ExponentPlan) -> list[LedgerRow]:
    """The eps-independent inequalities (i') to (vii'), evaluated exactly."""
    n, tau, A, a, b = plan.n, plan.tau, plan.a_seq, plan.a, plan.b
    rows = []

    def add(name, j, text, value):
        rows.append(LedgerRow(name, j, "exponent", text, value > 0, value=value))

    for j in range(1, n):
        add("i'", j, "a_{j+1} - 2 n tau max_{i<=j} a_i - 4 tau b > 0",
            A[j] - 2 * n * tau * max(A[:j]) - 4 * tau * b)
    for j in range(1, n):
        add("ii'", j, "1 - 2 n tau a_j - 4 tau b > 0", 1 - 2 * n * tau * A[j - 1] - 4 * tau * b)
    for j in range(1, n):
        add("iii'", j, "(tau - 1) a_j - 2 b > 0", (tau - 1) * A[j - 1] - 2 * b)
    for j in range(1, n + 1):
        add("iv'", j, "a_j - a > 0", A[j - 1] - a)
    add("v'", None, "a_1 - 2 b > 0", A[0] - 2 * b)
    for j in range(1, n + 1):
        add("vi'", j, "1 - a - (2n - 1) a_j - n a_1 - 6 b > 0",
            1 - a - (2 * n - 1) * A[j - 1] - n * A[0] - 6 * b)
    add("vii'", None, "1 - n a_n - 2 b > 0", 1 - n * A[-1] - 2 * b)
    return rows


@dataclass
class ConditionLedger:
    """All ledger rows for one parameter set and one value of eps."""

    inputs: dict
    plan: ExponentPlan
    rows: list[LedgerRow]
    eps: float
    binding: LedgerRow | None
    eps0: float
    log_eps0: float
    log_eps0_bisect: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, label: str) -> LedgerRow:
        for r in self.rows:
            if r.label() == label or r.name == label:
                return r
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs, "plan": self.plan.to_dict(), "eps": self.eps,
            "passed": self.passed,
            "binding": None if self.binding is None else self.binding.label(),
            "eps0": self.eps0, "log10_eps0": self.log_eps0 / math.log(10),
            "log10_eps0_bisect": self.log_eps0_bisect / math.log(10),
            "rows": [r.to_dict() for r in self.rows],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        """Aligned plain-text rendering."""
        lines = [f"{'row':<12} {'kind':<9} {'status':<6} {'detail'}"]
        for r in self.rows:
            if r.kind == "exponent":
                detail = f"{r.text}: {r.value} ({float(r.value):.6g})"
            else:
                detail = (f"{r.text}: eps < {r.threshold:.6g} "
                          f"(log10 {r.log_threshold / math.log(10):.6g})")
            lines.append(f"{r.label():<12} {r.kind:<9} {'pass' if r.passed else 'FAIL':<6} {detail}")
        lines.append(f"binding: {self.binding.label() if self.binding else 'none'}; "
                     f"eps0 = {self.eps0:.6g} (log10 {self.log_eps0 / math.log(10):.10g})")
        return "\n".join(lines)


def _threshold_rows(plan: ExponentPlan, gamma, R, r, s, consts: Constants) -> list[LedgerRow]:
    n, tau, A, a, b = plan.n, plan.tau, plan.a_seq, plan.a, plan.b
    rows = []

    def add(name, j, text, e, K):
        C = consts.condition(name)
        rows.append(LedgerRow(name, j, "threshold", text, True, exponent=Fraction(e), K=float(K),
                              constant=C))

    add("eps", None, "eps < 1", Fraction(1), 1.0)
    for j in range(1, n):
        add("viii'", j, "eps^(tau a_j) < gamma", tau * A[j - 1], gamma)
    add("ix'", None, "eps^b < gamma", b, gamma)
    add("x'", None, "eps^b < R", b, R)
    for j in range(1, n + 1):
        add("xi'", j, "eps^(n a_j + 2 b) < min(r, s)", n * A[j - 1] + 2 * b, min(r, s))
    # parameter conditions of the normal form with r_j = eps^(a_j), m = eps^-a
    for j in range(1, n + 1):
        add("A.mTr<s", j, "m T_j r_j = eps^(a_j - a) < s", A[j - 1] - a, s)
        add("A.r<s", j, "r_j = eps^(a_j) < s", A[j - 1], s)
    add("A.r1<r", None, "r_1 = eps^(a_1) < r", A[0], r)
    for j in range(1, n):
        add("B.shape", j, "r_{j+1} / r_j = eps^(a_{j+1} - a_j) < 1", A[j] - A[j - 1], 1.0)
    for row in rows:
        row.log_threshold = (math.log(row.K) - math.log(row.constant)) / float(row.exponent)
        row.threshold = math.exp(row.log_threshold) if row.log_threshold > -745 else 0.0
    return rows


def _evaluate(rows: list[LedgerRow], log_eps: float) -> bool:
    ok = True
    for row in rows:
        if row.kind == "threshold":
            row.passed = float(row.exponent) * log_eps < math.log(row.K) - math.log(row.constant)
            row.lhs = float(row.exponent) * log_eps + math.log(row.constant)
            row.rhs = math.log(row.K)
        ok = ok and row.passed
    return ok


def condition_ledger(n: int, tau, gamma: float, eps: float, *, R: float = 1.0, r: float = 1.0,
                     s: float = 1.0, M: float = 1.0, constants: Constants | None = None,
                     log_eps: float | None = None) -> ConditionLedger:
    """Evaluate every condition at eps and locate the threshold eps_0.

    Parameters
    ----------
    n, tau : as in :func:`exponent_plan`
    gamma, R, r, s, M : float
        SDM constant, ball radius, analyticity widths and C^3 bound. M only
        enters through the implicit constants and is recorded as an input.
    eps : float
        Perturbation size to evaluate at. Use `log_eps` (natural log) for
        values below the double range, e.g. ``log_eps = 432 * log(0.5)``.

    Notes
    -----
    Threshold rows pass iff ``e log eps < log K - log C`` (logs avoid
    underflow). The binding row has the smallest threshold; ties go to the
    smallest exponent, then to the listed order. eps_0 is computed in closed
    form and cross-checked by bisection on log eps.
    """
    if min(gamma, R, r, s, M) <= 0:
        raise ValueError("all inputs must be positive")
    constants = constants or Constants()
    plan = exponent_plan(n, tau)
    le = math.log(eps) if log_eps is None else float(log_eps)
    exp_rows = exponent_conditions(plan)
    thr_rows = _threshold_rows(plan, gamma, R, r, s, constants)
    rows = exp_rows + thr_rows
    _evaluate(rows, le)

    exps_ok = all(x.passed for x in exp_rows)
    order = {id(x): i for i, x in enumerate(thr_rows)}
    binding = min(thr_rows, key=lambda x: (x.log_threshold, x.exponent, order[id(x)]))
    log_eps0 = binding.log_threshold if exps_ok else -math.inf

    # independent bisection on log eps for the largest passing value
    if exps_ok:
        lo, hi = min(-1.0, 2 * log_eps0 - 1.0), 1.0
        if all(float(x.exponent) * lo < math.log(x.K) - math.log(x.constant) for x in thr_rows):
            for _ in range(2000):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                if all(float(x.exponent) * mid < math.log(x.K) - math.log(x.constant)
                       for x in thr_rows):
                    lo = mid
                else:
                    hi = mid
            log_bis = hi
        else:
            log_bis = -math.inf
    else:
        log_bis = -math.inf
    inputs = {"n": n, "tau": str(plan.tau), "gamma": gamma, "R": R, "r": r, "s": s, "M": M,
              "constants": constants.to_dict()}
    eps0 = math.exp(log_eps0) if log_eps0 > -745 else 0.0
    return ConditionLedger(inputs, plan, rows, eps if log_eps is None else math.exp(le),
                           binding if exps_ok else None, eps0, log_eps0, log_bis)
