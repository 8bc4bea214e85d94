"""Hamiltonians that are polynomial in the actions and trigonometric in the angles.

A term is ``c * exp(2 pi i k.theta) * I**alpha`` carrying an integer grade,
the power of the perturbation size eps it is of order. Coefficients are the
actual numbers (eps already included); the grade is bookkeeping that brackets
add up, so statements such as "this remainder is O(eps^2)" can be read off the
grading independently of numeric size. Template files can store coefficients
per unit eps and be filled in with :meth:`TrigPolyHamiltonian.instantiate`.

The Poisson bracket convention is ``{f, g} = d_theta f . d_I g - d_I f . d_theta g``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from .diophantine import PeriodicVector

__all__ = [
    "TrigPolyHamiltonian",
    "AnalyticDomain",
    "poisson_bracket",
    "average_along",
    "homological_solve",
    "majorant_norm",
    "weighted_vf_norm",
    "angular_norm",
    "action_norm",
    "linear_hamiltonian",
]

TWO_PI = 2.0 * math.pi

Key = tuple  # (k, alpha, grade)


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


class TrigPolyHamiltonian:
    """Finite sum of Fourier-polynomial terms.

    Parameters
    ----------
    n : int
        Number of degrees of freedom.
    terms : mapping, optional
        ``{(k, alpha, grade): coefficient}`` with integer tuples ``k`` and
        ``alpha`` of length n and a nonnegative integer grade. Duplicated keys
        are summed and exact zeros dropped.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[Key, complex] | Iterable | None = None):
        self.n = int(n)
        acc: dict[Key, complex] = defaultdict(complex)
        if terms is not None:
            items = terms.items() if isinstance(terms, Mapping) else terms
            for key, c in items:
                k, alpha, grade = key
                k = tuple(int(x) for x in k)
                alpha = tuple(int(x) for x in alpha)
                if len(k) != self.n or len(alpha) != self.n:
                    raise ValueError(f"term {key} does not match dimension {self.n}")
                if min(alpha, default=0) < 0 or grade < 0:
                    raise ValueError(f"negative exponent in term {key}")
                acc[(k, alpha, int(grade))] += complex(c)
        self._terms = {key: c for key, c in acc.items() if c != 0}

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "TrigPolyHamiltonian":
        return cls(n)

    @classmethod
    def monomial(cls, alpha: Sequence[int], coeff: complex = 1.0, grade: int = 0):
        """``coeff * I**alpha`` (angle free)."""
        n = len(alpha)
        return cls(n, {((0,) * n, tuple(alpha), grade): coeff})

    @classmethod
    def exp_mode(cls, k: Sequence[int], coeff: complex = 1.0, alpha=None, grade: int = 0):
        """A single complex exponential (not real on its own)."""
        n = len(k)
        alpha = (0,) * n if alpha is None else tuple(alpha)
        return cls(n, {(tuple(k), alpha, grade): coeff})

    @classmethod
    def cos_mode(cls, k: Sequence[int], amp: float = 1.0, alpha=None, grade: int = 0):
        """``amp * cos(2 pi k.theta) * I**alpha``."""
        k = tuple(k)
        mk = tuple(-x for x in k)
        n = len(k)
        alpha = (0,) * n if alpha is None else tuple(alpha)
        if not any(k):
            return cls(n, {(k, alpha, grade): amp})
        return cls(n, [((k, alpha, grade), amp / 2), ((mk, alpha, grade), amp / 2)])

    @classmethod
    def sin_mode(cls, k: Sequence[int], amp: float = 1.0, alpha=None, grade: int = 0):
        """``amp * sin(2 pi k.theta) * I**alpha``."""
        k = tuple(k)
        mk = tuple(-x for x in k)
        n = len(k)
        alpha = (0,) * n if alpha is None else tuple(alpha)
        return cls(n, [((k, alpha, grade), -0.5j * amp), ((mk, alpha, grade), 0.5j * amp)])

    @classmethod
    def quadratic(cls, diag: Sequence[float], grade: int = 0):
        """``sum_i diag_i I_i**2 / 2``."""
        n = len(diag)
        terms = {}
        for i, a in enumerate(diag):
            alpha = tuple(2 if j == i else 0 for j in range(n))
            terms[((0,) * n, alpha, grade)] = a / 2
        return cls(n, terms)

    # -- container protocol --------------------------------------------------

    @property
    def terms(self) -> dict[Key, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    def modes(self) -> set[tuple[int, ...]]:
        return {k for (k, _, _) in self._terms}

    def grades(self) -> set[int]:
        return {g for (_, _, g) in self._terms}

    def degree(self) -> int:
        return max((sum(a) for (_, a, _) in self._terms), default=0)

    def max_mode(self) -> int:
        """Largest ``|k|_1`` present."""
        return max((sum(abs(x) for x in k) for (k, _, _) in self._terms), default=0)

    def __repr__(self):
        return f"TrigPolyHamiltonian(n={self.n}, terms={len(self._terms)})"

    # -- arithmetic ----------------------------------------------------------

    def _check(self, other: "TrigPolyHamiltonian"):
        if not isinstance(other, TrigPolyHamiltonian):
            return NotImplemented
        if other.n != self.n:
            raise ValueError(f"dimension mismatch: {self.n} vs {other.n}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        acc = dict(self._terms)
        for key, c in other._terms.items():
            acc[key] = acc.get(key, 0) + c
        return TrigPolyHamiltonian(self.n, acc)

    def __neg__(self):
        return TrigPolyHamiltonian(self.n, {key: -c for key, c in self._terms.items()})

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, TrigPolyHamiltonian):
            self._check(other)
            acc: dict[Key, complex] = defaultdict(complex)
            for (k1, a1, g1), c1 in self._terms.items():
                for (k2, a2, g2), c2 in other._terms.items():
                    acc[(_add(k1, k2), _add(a1, a2), g1 + g2)] += c1 * c2
            return TrigPolyHamiltonian(self.n, acc)
        if isinstance(other, (int, float, complex, np.number)):
            return TrigPolyHamiltonian(self.n, {key: c * other for key, c in self._terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1.0 / other)

    # -- derivatives ---------------------------------------------------------

    def d_theta(self, i: int) -> "TrigPolyHamiltonian":
        """Partial derivative in the angle theta_i (the 2 pi is explicit)."""
        return TrigPolyHamiltonian(
            self.n,
            {key: c * (2j * math.pi * key[0][i]) for key, c in self._terms.items() if key[0][i]},
        )

    def d_action(self, i: int) -> "TrigPolyHamiltonian":
        """Partial derivative in the action I_i."""
        out = {}
        for (k, a, g), c in self._terms.items():
            if a[i]:
                b = a[:i] + (a[i] - 1,) + a[i + 1:]
                out[(k, b, g)] = c * a[i]
        return TrigPolyHamiltonian(self.n, out)

    def gradient_theta(self) -> list["TrigPolyHamiltonian"]:
        return [self.d_theta(i) for i in range(self.n)]

    def gradient_action(self) -> list["TrigPolyHamiltonian"]:
        return [self.d_action(i) for i in range(self.n)]

    # -- structural pieces -----------------------------------------------------

    def filter(self, pred) -> "TrigPolyHamiltonian":
        """Keep terms whose key ``(k, alpha, grade)`` satisfies `pred`."""
        return TrigPolyHamiltonian(self.n, {key: c for key, c in self._terms.items() if pred(key)})

    def integrable_part(self) -> "TrigPolyHamiltonian":
        return self.filter(lambda key: not any(key[0]))

    def angular_part(self) -> "TrigPolyHamiltonian":
        return self.filter(lambda key: any(key[0]))

    def is_integrable(self) -> bool:
        return all(not any(k) for (k, _, _) in self._terms)

    def grade_part(self, grade: int) -> "TrigPolyHamiltonian":
        return self.filter(lambda key: key[2] == grade)

    def truncate_grade(self, max_grade: int) -> "TrigPolyHamiltonian":
        return self.filter(lambda key: key[2] <= max_grade)

    def with_grade(self, grade: int) -> "TrigPolyHamiltonian":
        """Same coefficients, all terms tagged with `grade`."""
        return TrigPolyHamiltonian(self.n, [((k, a, grade), c) for (k, a, _), c in self._terms.items()])

    def instantiate(self, eps: float) -> "TrigPolyHamiltonian":
        """Multiply every coefficient by ``eps**grade`` (grades are kept)."""
        return TrigPolyHamiltonian(
            self.n, {(k, a, g): c * eps ** g for (k, a, g), c in self._terms.items()}
        )

    def drop_grades(self) -> "TrigPolyHamiltonian":
        """Forget the grading (all terms become grade 0)."""
        return self.with_grade(0)

    def translate(self, shift: Sequence[float]) -> "TrigPolyHamiltonian":
        """``F(theta, I + shift)`` re-expanded in monomials of I."""
        shift = tuple(float(x) for x in shift)
        if not any(shift):
            return self
        acc: dict[Key, complex] = defaultdict(complex)
        for (k, a, g), c in self._terms.items():
            for beta, w in _reexpand(a, shift).items():
                acc[(k, beta, g)] += c * w
        return TrigPolyHamiltonian(self.n, acc)

    def prune(self, tol: float) -> "TrigPolyHamiltonian":
        """Drop coefficients with modulus <= tol."""
        return self.filter(lambda key: abs(self._terms[key]) > tol)

    def real_part_check(self) -> float:
        """Largest ``|c(k, alpha) - conj(c(-k, alpha))|``; 0 for a real function."""
        worst = 0.0
        for (k, a, g), c in self._terms.items():
            mk = tuple(-x for x in k)
            worst = max(worst, abs(c - self._terms.get((mk, a, g), 0).conjugate()))
        return worst

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def allclose(self, other: "TrigPolyHamiltonian", atol: float = 1e-12) -> bool:
        return (self - other).max_abs_coeff() <= atol

    # -- evaluation ----------------------------------------------------------

    def to_arrays(self):
        """Dense arrays ``(K, A, C)`` with terms of equal (k, alpha) merged.

        ``K`` and ``A`` are int64 arrays of shape (m, n); ``C`` is complex128.
        """
        flat = self.drop_grades()
        if not flat._terms:
            return (np.zeros((0, self.n), np.int64), np.zeros((0, self.n), np.int64),
                    np.zeros(0, np.complex128))
        keys = list(flat._terms)
        K = np.array([key[0] for key in keys], dtype=np.int64)
        A = np.array([key[1] for key in keys], dtype=np.int64)
        C = np.array([flat._terms[key] for key in keys], dtype=np.complex128)
        return K, A, C

    def __call__(self, theta, I):
        """Evaluate the real part at points; leading dims of theta and I broadcast."""
        theta = np.asarray(theta, dtype=float)
        I = np.asarray(I, dtype=float)
        K, A, C = self.to_arrays()
        if len(C) == 0:
            return np.zeros(np.broadcast_shapes(theta.shape[:-1], I.shape[:-1]))
        phase = np.exp(2j * math.pi * (theta @ K.T))
        mono = np.prod(I[..., None, :] ** A, axis=-1)
        return np.real(np.sum(C * phase * mono, axis=-1))

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        rows = []
        for (k, a, g), c in sorted(self._terms.items()):
            row = {"k": list(k), "alpha": list(a), "re": c.real, "im": c.imag}
            if g:
                row["grade"] = g
            rows.append(row)
        return {"n": self.n, "terms": rows}

    @classmethod
    def from_dict(cls, d: dict) -> "TrigPolyHamiltonian":
        n = int(d["n"])
        terms = []
        for row in d["terms"]:
            key = (tuple(row["k"]), tuple(row["alpha"]), int(row.get("grade", 0)))
            terms.append((key, complex(row.get("re", 0.0), row.get("im", 0.0))))
        return cls(n, terms)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "TrigPolyHamiltonian":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "TrigPolyHamiltonian":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def linear_hamiltonian(omega) -> TrigPolyHamiltonian:
    """``l_omega(I) = omega . I``."""
    w = omega.to_array() if isinstance(omega, PeriodicVector) else np.asarray(omega, float)
    n = len(w)
    terms = {}
    for i, wi in enumerate(w):
        terms[((0,) * n, tuple(1 if j == i else 0 for j in range(n)), 0)] = float(wi)
    return TrigPolyHamiltonian(n, terms)


# ---------------------------------------------------------------------------
# Bracket, averaging, homological equation
# ---------------------------------------------------------------------------

def poisson_bracket(f: TrigPolyHamiltonian, g: TrigPolyHamiltonian) -> TrigPolyHamiltonian:
    """``{f, g} = d_theta f . d_I g - d_I f . d_theta g``.

    Works term by term: for monomials ``a = c1 e(k1) I^a1`` and
    ``b = c2 e(k2) I^a2`` the bracket is
    ``2 pi i c1 c2 e(k1+k2) sum_i (k1_i a2_i - a1_i k2_i) I^(a1+a2-e_i)``.
    """
    if f.n != g.n:
        raise ValueError(f"dimension mismatch: {f.n} vs {g.n}")
    n = f.n
    acc: dict[Key, complex] = defaultdict(complex)
    for (k1, a1, g1), c1 in f.items():
        for (k2, a2, g2), c2 in g.items():
            k = _add(k1, k2)
            a = _add(a1, a2)
            cc = 2j * math.pi * c1 * c2
            for i in range(n):
                w = k1[i] * a2[i] - a1[i] * k2[i]
                if w:
                    acc[(k, a[:i] + (a[i] - 1,) + a[i + 1:], g1 + g2)] += cc * w
    return TrigPolyHamiltonian(n, acc)


def average_along(f: TrigPolyHamiltonian, omega: PeriodicVector) -> TrigPolyHamiltonian:
    """Time average along the flow of ``omega . I``: keeps modes with ``k.omega = 0``."""
    if omega.n != f.n:
        raise ValueError("dimension mismatch")
    return f.filter(lambda key: omega.is_resonant(key[0]))


def homological_solve(f: TrigPolyHamiltonian, omega: PeriodicVector) -> TrigPolyHamiltonian:
    """Solve ``{chi, omega . I} = f - [f]`` mode by mode.

    ``chi_k = f_k / (2 pi i k.omega)`` on nonresonant modes; the divisor is the
    exact rational ``k.omega`` whose modulus is at least ``1/T``.
    """
    if omega.n != f.n:
        raise ValueError("dimension mismatch")
    out = {}
    for (k, a, g), c in f.items():
        d = omega.dot(k)
        if d:
            out[(k, a, g)] = c / (2j * math.pi * float(d))
    return TrigPolyHamiltonian(f.n, out)


def divisors_used(f: TrigPolyHamiltonian, omega: PeriodicVector):
    """Exact divisors ``|k.omega|`` that :func:`homological_solve` divides by."""
    return sorted({abs(omega.dot(k)) for k in f.modes() if not omega.is_resonant(k)})


# ---------------------------------------------------------------------------
# Domains and norms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticDomain:
    """Complex neighbourhood ``|Im theta| < s``, ``d(I, B) < r``.

    With ``center`` unset, B is the sup-norm ball of radius R about the origin
    and polynomial coefficients are weighted by ``(R + r)^|alpha|``. With a
    center (an action point where ``grad h`` equals the anchor frequency) the
    polynomial part is re-expanded about the center and weighted by
    ``r^|alpha|``; this is the nearly-periodic domain around that frequency.
    """

    r: float
    s: float
    R: float = 1.0
    center: tuple[float, ...] | None = None
    anchor: PeriodicVector | None = None
    window: float = 1.0

    def __post_init__(self):
        if not (0 < self.r < 1):
            raise ValueError(f"need 0 < r < 1, got r={self.r}")
        if not (0 <= self.s < 1):
            raise ValueError(f"need 0 <= s < 1, got s={self.s}")
        if self.R <= 0:
            raise ValueError(f"need R > 0, got R={self.R}")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(x) for x in self.center))

    def shrink(self, dr: float, ds: float) -> "AnalyticDomain":
        return AnalyticDomain(self.r - dr, self.s - ds, self.R, self.center, self.anchor, self.window)

    def scaled(self, fr: float, fs: float) -> "AnalyticDomain":
        return AnalyticDomain(self.r * fr, self.s * fs, self.R, self.center, self.anchor, self.window)


def _reexpand(alpha: tuple[int, ...], center: tuple[float, ...]):
    """Coefficients of ``(c + u)^alpha`` as ``{beta: coeff}``."""
    out = {(): 1.0}
    for ai, ci in zip(alpha, center):
        new = {}
        for beta, v in out.items():
            for b in range(ai + 1):
                w = comb(ai, b) * ci ** (ai - b)
                if w:
                    new[beta + (b,)] = new.get(beta + (b,), 0.0) + v * w
        out = new
    return out


def majorant_norm(f: TrigPolyHamiltonian, dom: AnalyticDomain) -> float:
    """Coefficient majorant of the sup norm of f on the domain.

    ``sum_k exp(2 pi |k|_1 s) sum_alpha |c_{k,alpha}| rho^|alpha|`` with
    ``rho = R + r``, or the analogous sum after re-expanding about
    ``dom.center`` with ``rho = r``.
    """
    if f.is_zero():
        return 0.0
    if dom.center is None:
        rho = dom.R + dom.r
        total = 0.0
        for (k, a, _), c in f.items():
            total += abs(c) * math.exp(TWO_PI * sum(abs(x) for x in k) * dom.s) * rho ** sum(a)
        return total
    # re-expand each Fourier coefficient about the center, then bound
    per_k: dict[tuple, dict] = defaultdict(lambda: defaultdict(complex))
    for (k, a, _), c in f.items():
        for beta, w in _reexpand(a, dom.center).items():
            per_k[k][beta] += c * w
    total = 0.0
    for k, poly in per_k.items():
        wk = math.exp(TWO_PI * sum(abs(x) for x in k) * dom.s)
        total += wk * sum(abs(c) * dom.r ** sum(beta) for beta, c in poly.items())
    return total


def action_norm(f: TrigPolyHamiltonian, dom: AnalyticDomain) -> float:
    """``max_i`` majorant of ``d f / d I_i``."""
    return max((majorant_norm(f.d_action(i), dom) for i in range(f.n)), default=0.0)


def angular_norm(f: TrigPolyHamiltonian, dom: AnalyticDomain) -> float:
    """``max_i`` majorant of ``d f / d theta_i``."""
    return max((majorant_norm(f.d_theta(i), dom) for i in range(f.n)), default=0.0)


def weighted_vf_norm(f: TrigPolyHamiltonian, dom: AnalyticDomain, s1_over_r1: float) -> float:
    """``max(|d_I f|, (s1/r1) |d_theta f|)`` in majorant norms."""
    if s1_over_r1 < 1:
        raise ValueError("the weight s1/r1 must be >= 1")
    return max(action_norm(f, dom), s1_over_r1 * angular_norm(f, dom))
